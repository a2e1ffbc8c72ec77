#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "dgseg/random_source.hpp"

namespace dgseg {

struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};
/// Symmetric Beta(alpha, alpha).
struct BetaDist {
  double alpha = 0.1;
};
/// One success probability per output element.
struct BernoulliDist {
  std::vector<double> p;
};
struct NormalDist {
  double mean = 0.0;
  double stddev = 1.0;
};

using Distribution = std::variant<UniformDist, BetaDist, BernoulliDist, NormalDist>;

/// Row-major draws of `dist` filling `shape`, in element order.
std::vector<double> sample(const Distribution& dist, std::span<const std::size_t> shape, RandomSource& rng);

inline std::vector<double> sample(const Distribution& dist, std::initializer_list<std::size_t> shape,
                                  RandomSource& rng) {
  return sample(dist, std::span<const std::size_t>(shape.begin(), shape.size()), rng);
}

}  // namespace dgseg
