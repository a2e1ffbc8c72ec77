#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgseg/layers.hpp"
#include "dgseg/style_ops.hpp"

namespace dgseg {

inline constexpr int kNumStages = 4;

/// Set of encoder stages (res1..res4) followed by a perturbation hook.
class InsertionSet {
 public:
  InsertionSet() = default;
  static InsertionSet none() { return {}; }
  static InsertionSet of(std::initializer_list<int> stages);  // 1-based stage numbers
  /// Accepts "res1", "res12", "res1234", "none".
  static InsertionSet parse(const std::string& tag);

  bool contains(int stage) const { return (bits_ >> (stage - 1)) & 1U; }  // 1-based
  bool empty() const { return bits_ == 0; }
  std::string to_string() const;                 // "res12", or "none"
  std::vector<std::string> names() const;        // {"res1", "res2"}
  bool operator==(const InsertionSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

struct NetworkConfig {
  int in_channels = 1;
  int num_classes = 3;
  std::vector<int> stage_widths{16, 32, 64, 128};
  int blocks_per_stage = 2;
  InsertionSet insertion_points = InsertionSet::of({1, 2});

  /// Throws std::invalid_argument unless there are exactly four positive widths etc.
  void validate() const;
  int downsample_factor() const { return 1 << kNumStages; }
};

/// Per-call knobs beyond mode and perturbation config.
template <typename T>
struct ForwardOptions {
  /// Overrides the normalization statistics choice (default: batch in train, running in eval).
  std::optional<NormMode> norm;
  /// Passed to every hook; e.g. gate_open = false keeps hooks closed.
  PerturbControls controls;
  /// Called with (stage 1..4, stage output before its hook).
  std::function<void(int, const Tensor<T>&)> capture;
};

/// U-shaped residual encoder-decoder.
///
///   stem    conv3x3 -> BN -> ReLU                       (full resolution, w0)
///   res1-4  residual stages, each opening with a stride-2 block (w0..w3)
///   hooks   style perturbation after each stage in insertion_points
///   decoder 4 levels of nearest upsample -> concat skip -> conv3x3 -> BN -> ReLU
///   head    conv1x1 -> per-pixel logits
template <typename T>
class Network {
 public:
  Network(NetworkConfig cfg, RandomSource init_rng);

  const NetworkConfig& config() const { return cfg_; }

  Tensor<T> forward(const Tensor<T>& images, const PerturbConfig& perturb, Mode mode, RandomSource& rng,
                    const ForwardOptions<T>& opts = {});
  /// Backpropagates d loss / d logits of the last forward, accumulating into parameter gradients.
  void backward(const Tensor<T>& grad_logits);

  void zero_grad();
  std::vector<Param<T>*> parameters();
  std::vector<Param<T>*> buffers();
  /// Trainable parameters followed by buffers, in a fixed order.
  std::vector<Param<T>*> state();
  std::size_t parameter_count();

  /// Applied-perturbation flags of the last forward, per stage (1-based index - 1).
  const std::array<bool, kNumStages>& last_hooks_applied() const { return hook_applied_; }

 private:
  struct ResBlock {
    Conv2d<T> conv1, conv2;
    BatchNorm2d<T> bn1, bn2;
    std::optional<Conv2d<T>> proj;
    std::optional<BatchNorm2d<T>> proj_bn;
    Tensor<T> mid, out;  // post-ReLU activations
    Tensor<T> forward(const Tensor<T>& x, NormMode mode);
    Tensor<T> backward(Tensor<T> grad);
    void collect(std::vector<Param<T>*>& p);
    void collect_buffers(std::vector<Param<T>*>& p);
  };
  struct DecoderLevel {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;
    int up_channels = 0;
    Tensor<T> out;
  };

  NetworkConfig cfg_;
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  Tensor<T> stem_out_;
  std::array<std::vector<ResBlock>, kNumStages> stages_;
  std::array<DecoderLevel, kNumStages> decoder_;  // index i produces the resolution of stage i-1 (stem for 0)
  Conv2d<T> head_;
  std::array<std::optional<PerturbResult<T>>, kNumStages> hooks_;
  std::array<bool, kNumStages> hook_applied_{};
};

}  // namespace dgseg
