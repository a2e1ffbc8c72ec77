#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgseg/layers.hpp"
#include "dgseg/tensor.hpp"

namespace dgseg {

/// Per-pixel class labels, one channel.
using LabelBatch = Tensor<std::uint8_t>;

template <typename T>
struct LossResult {
  double total = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  Tensor<T> grad;  // d total / d logits
};

inline constexpr double kDiceSmooth = 1e-5;

/// Dice + cross-entropy on softmax probabilities.
///
/// Dice is pooled over the whole batch and averaged over the foreground
/// classes 1..K-1; cross-entropy is the mean pixelwise negative log-likelihood.
template <typename T>
LossResult<T> dice_ce_loss(const Tensor<T>& logits, const LabelBatch& labels, double smooth = kDiceSmooth);

struct TrainSchedule {
  double l0 = 0.01;
  int epochs = 40;
  double momentum = 0.99;
  int batch_size = 8;

  void validate() const;
};

/// l0 * (1 - t/T)^0.9, for integer epochs 0 <= t <= T.
double poly_lr(const TrainSchedule& schedule, int epoch);

/// Classical momentum: v <- momentum * v + g; theta <- theta - lr * v.
/// Throws std::runtime_error naming `what` if any gradient is non-finite.
template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr, double momentum, std::span<T> velocity,
              const std::string& what = "parameter");

/// SGD with per-parameter velocity buffers.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}
  void step(const std::vector<Param<T>*>& params, double lr);

 private:
  double momentum_;
  std::vector<std::vector<T>> velocity_;
};

}  // namespace dgseg
