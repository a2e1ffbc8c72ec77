#pragma once

#include <span>
#include <vector>

#include "dgseg/tensor.hpp"

namespace dgseg {

inline constexpr double kDefaultStatsEps = 1e-6;

/// Per-(sample, channel) spatial mean and standard deviation.
/// std = sqrt(unbiased variance + eps), so std >= sqrt(eps) > 0.
struct ChannelStats {
  ChannelGrid mean;
  ChannelGrid std;
  double eps = kDefaultStatsEps;

  int batch() const { return mean.batch(); }
  int channels() const { return mean.channels(); }
};

/// Rejects tensors with non-finite values or fewer than two spatial positions.
template <typename T>
void check_feature_batch(const Tensor<T>& f);

/// Mean and std over (h, w) with the N-1 divisor; accumulates in double.
template <typename T>
ChannelStats channel_mean_std(const Tensor<T>& f, double eps = kDefaultStatsEps);

/// (f - mean) / std per channel. The statistics are constants for
/// differentiation: d out / d f = 1 / std[b, c].
template <typename T>
Tensor<T> normalize(const Tensor<T>& f, const ChannelStats& stats);

/// gamma[b, c] * f + beta[b, c].
template <typename T>
Tensor<T> apply_affine(const Tensor<T>& f_normed, const ChannelGrid& gamma, const ChannelGrid& beta);

/// Exact histogram matching of one spatial vector onto another.
///
/// The k-th smallest source position receives the k-th smallest reference
/// value. Source ties are ordered by spatial index (stable sort), so the
/// result is a deterministic permutation of `reference`.
template <typename T>
std::vector<T> rank_match(std::span<const T> source, std::span<const T> reference);

}  // namespace dgseg
