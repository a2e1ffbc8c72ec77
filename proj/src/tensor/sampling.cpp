#include "dgseg/sampling.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace dgseg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::vector<double> sample(const Distribution& dist, std::span<const std::size_t> shape, RandomSource& rng) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  std::vector<double> out(n);
  std::visit(overloaded{
                 [&](const UniformDist& d) {
                   if (!(d.lo <= d.hi)) throw std::invalid_argument("uniform: lo must not exceed hi");
                   for (double& v : out) v = rng.uniform(d.lo, d.hi);
                 },
                 [&](const BetaDist& d) {
                   if (!(d.alpha > 0.0)) throw std::invalid_argument("beta: alpha must be positive");
                   for (double& v : out) v = rng.beta(d.alpha, d.alpha);
                 },
                 [&](const BernoulliDist& d) {
                   if (d.p.size() != n) {
                     throw std::invalid_argument("bernoulli: probability count does not match shape");
                   }
                   for (double p : d.p) {
                     if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli: p outside [0, 1]");
                   }
                   for (std::size_t i = 0; i < n; ++i) out[i] = rng.bernoulli(d.p[i]) ? 1.0 : 0.0;
                 },
                 [&](const NormalDist& d) {
                   if (!(d.stddev >= 0.0)) throw std::invalid_argument("normal: stddev must be non-negative");
                   for (double& v : out) v = rng.normal(d.mean, d.stddev);
                 },
             },
             dist);
  return out;
}

}  // namespace dgseg
