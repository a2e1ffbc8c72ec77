#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgseg {

/// Dimensions of a batched feature map in (batch, channel, height, width) order.
struct Shape4 {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t count() const { return plane() * channels * batch; }
  bool operator==(const Shape4&) const = default;
};

inline std::string to_string(const Shape4& s);

/// Dense NCHW tensor with contiguous row-major storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape4 shape, T fill = T{0})
      : shape_(validated(shape)), data_(shape_.count(), fill) {}
  Tensor(Shape4 shape, std::vector<T> values) : shape_(validated(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.count()) {
      throw std::invalid_argument("tensor: value count " + std::to_string(data_.size()) +
                                  " does not match shape " + to_string(shape_));
    }
  }

  const Shape4& shape() const { return shape_; }
  int batch() const { return shape_.batch; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t plane() const { return shape_.plane(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int b, int c, int h, int w) { return data_[index(b, c, h, w)]; }
  const T& operator()(int b, int c, int h, int w) const { return data_[index(b, c, h, w)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  /// Spatial plane of one (sample, channel) pair.
  std::span<T> channel(int b, int c) { return {data_.data() + offset(b, c), plane()}; }
  std::span<const T> channel(int b, int c) const { return {data_.data() + offset(b, c), plane()}; }

  /// All channels of one sample.
  std::span<T> sample(int b) {
    return {data_.data() + offset(b, 0), plane() * static_cast<std::size_t>(shape_.channels)};
  }
  std::span<const T> sample(int b) const {
    return {data_.data() + offset(b, 0), plane() * static_cast<std::size_t>(shape_.channels)};
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  static Shape4 validated(Shape4 s) {
    if (s.batch < 1 || s.channels < 1 || s.height < 1 || s.width < 1) {
      throw std::invalid_argument("tensor: non-positive dimension in " + to_string(s));
    }
    return s;
  }
  std::size_t offset(int b, int c) const {
    return (static_cast<std::size_t>(b) * shape_.channels + c) * plane();
  }
  std::size_t index(int b, int c, int h, int w) const {
    return offset(b, c) + static_cast<std::size_t>(h) * shape_.width + w;
  }

  Shape4 shape_{};
  std::vector<T> data_;
};

using FeatureBatch = Tensor<float>;

/// Dense batch × channel table of 64-bit reals (statistics, gates, masks).
class ChannelGrid {
 public:
  ChannelGrid() = default;
  ChannelGrid(int batch, int channels, double fill = 0.0)
      : batch_(batch), channels_(channels), values_(static_cast<std::size_t>(batch) * channels, fill) {
    if (batch < 1 || channels < 1) throw std::invalid_argument("channel grid: non-positive dimension");
  }

  int batch() const { return batch_; }
  int channels() const { return channels_; }
  double& operator()(int b, int c) { return values_[static_cast<std::size_t>(b) * channels_ + c]; }
  double operator()(int b, int c) const { return values_[static_cast<std::size_t>(b) * channels_ + c]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  bool same_shape(const ChannelGrid& o) const { return batch_ == o.batch_ && channels_ == o.channels_; }

  bool operator==(const ChannelGrid&) const = default;

 private:
  int batch_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

inline std::string to_string(const Shape4& s) {
  return std::to_string(s.batch) + "x" + std::to_string(s.channels) + "x" + std::to_string(s.height) +
         "x" + std::to_string(s.width);
}

}  // namespace dgseg
