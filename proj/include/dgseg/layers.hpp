#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgseg/random_source.hpp"
#include "dgseg/tensor.hpp"

namespace dgseg {

/// Named trainable (or buffer) tensor with its gradient.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> dims;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> d, T fill = T{0});
  std::size_t size() const { return value.size(); }
};

/// 2-D convolution, square kernel, zero padding kernel/2. im2col + GEMM.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, bool bias);

  /// He-normal weights (fan-in, ReLU gain); zero bias.
  void init(RandomSource& rng);
  Tensor<T> forward(const Tensor<T>& x);
  /// Accumulates parameter gradients; returns d loss / d input.
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(std::vector<Param<T>*>& params);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  Shape4 output_shape(const Shape4& in) const;
  void im2col(const Tensor<T>& x, int b, T* col) const;
  void col2im(const T* col, Tensor<T>& dx, int b) const;

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
  bool has_bias_ = false;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
  std::vector<T> col_;
};

enum class NormMode { batch, running };

/// Batch normalization over (N, H, W) per channel.
template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels);

  /// `batch` mode normalizes with batch statistics and updates the running
  /// estimates; `running` mode uses the stored estimates.
  Tensor<T> forward(const Tensor<T>& x, NormMode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void collect(std::vector<Param<T>*>& params);
  void collect_buffers(std::vector<Param<T>*>& buffers);

 private:
  int channels_ = 0;
  Param<T> gamma_, beta_;
  Param<T> running_mean_, running_var_;
  NormMode last_mode_ = NormMode::batch;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

template <typename T>
void relu_inplace(Tensor<T>& x);
/// Zeroes gradient where the (post-activation) output was not positive.
template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& activated);

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// Splits a gradient of concat(a, b) at channel `split`.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int split);

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src);

}  // namespace dgseg
