#include "dgseg/channel_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dgseg {

template <typename T>
void check_feature_batch(const Tensor<T>& f) {
  if (f.empty()) throw std::invalid_argument("feature batch is empty");
  if (f.plane() < 2) {
    throw std::invalid_argument("feature batch " + to_string(f.shape()) +
                                " has fewer than two spatial positions; variance undefined");
  }
  for (T v : f.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature batch contains a non-finite value");
  }
}

template <typename T>
ChannelStats channel_mean_std(const Tensor<T>& f, double eps) {
  check_feature_batch(f);
  if (!(eps > 0.0)) throw std::invalid_argument("channel_mean_std: eps must be positive");
  ChannelStats s{ChannelGrid(f.batch(), f.channels()), ChannelGrid(f.batch(), f.channels()), eps};
  const double n = static_cast<double>(f.plane());
  for (int b = 0; b < f.batch(); ++b) {
    for (int c = 0; c < f.channels(); ++c) {
      const auto plane = f.channel(b, c);
      double sum = 0.0;
      for (T v : plane) sum += static_cast<double>(v);
      const double mean = sum / n;
      double ss = 0.0;
      for (T v : plane) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
      }
      s.mean(b, c) = mean;
      s.std(b, c) = std::sqrt(ss / (n - 1.0) + eps);
    }
  }
  return s;
}

template <typename T>
Tensor<T> normalize(const Tensor<T>& f, const ChannelStats& stats) {
  if (stats.batch() != f.batch() || stats.channels() != f.channels()) {
    throw std::invalid_argument("normalize: statistics shape does not match " + to_string(f.shape()));
  }
  Tensor<T> out(f.shape());
  for (int b = 0; b < f.batch(); ++b) {
    for (int c = 0; c < f.channels(); ++c) {
      const double mu = stats.mean(b, c);
      const double inv = 1.0 / stats.std(b, c);
      const auto src = f.channel(b, c);
      auto dst = out.channel(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<T>((static_cast<double>(src[i]) - mu) * inv);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> apply_affine(const Tensor<T>& f_normed, const ChannelGrid& gamma, const ChannelGrid& beta) {
  if (gamma.batch() != f_normed.batch() || gamma.channels() != f_normed.channels() ||
      !gamma.same_shape(beta)) {
    throw std::invalid_argument("apply_affine: gamma/beta shape does not match " +
                                to_string(f_normed.shape()));
  }
  Tensor<T> out(f_normed.shape());
  for (int b = 0; b < f_normed.batch(); ++b) {
    for (int c = 0; c < f_normed.channels(); ++c) {
      const double g = gamma(b, c);
      const double be = beta(b, c);
      const auto src = f_normed.channel(b, c);
      auto dst = out.channel(b, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<T>(g * static_cast<double>(src[i]) + be);
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> rank_match(std::span<const T> source, std::span<const T> reference) {
  if (source.size() != reference.size()) {
    throw std::invalid_argument("rank_match: length mismatch (" + std::to_string(source.size()) + " vs " +
                                std::to_string(reference.size()) + ")");
  }
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return source[a] < source[b]; });
  std::vector<T> sorted_ref(reference.begin(), reference.end());
  std::sort(sorted_ref.begin(), sorted_ref.end());
  std::vector<T> out(source.size());
  for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = sorted_ref[k];
  return out;
}

#define DGSEG_INSTANTIATE(T)                                                                   \
  template void check_feature_batch<T>(const Tensor<T>&);                                     \
  template ChannelStats channel_mean_std<T>(const Tensor<T>&, double);                        \
  template Tensor<T> normalize<T>(const Tensor<T>&, const ChannelStats&);                     \
  template Tensor<T> apply_affine<T>(const Tensor<T>&, const ChannelGrid&, const ChannelGrid&); \
  template std::vector<T> rank_match<T>(std::span<const T>, std::span<const T>);

DGSEG_INSTANTIATE(float)
DGSEG_INSTANTIATE(double)
#undef DGSEG_INSTANTIATE

}  // namespace dgseg
