#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dgseg {

/// Seeded random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All distributions are implemented here from raw 64-bit words
/// rather than through <random> distribution objects, whose algorithms are
/// implementation-defined. Same seed therefore means the same draws on every
/// platform and standard library.
///
/// Sub-streams are keyed: `derive({fold, epoch, module})` hashes the parent
/// seed with the keys through SplitMix64, so streams for different key tuples
/// are independent and do not depend on how much the parent has been consumed.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  RandomSource derive(std::initializer_list<std::uint64_t> keys) const;
  RandomSource derive(std::string_view tag, std::initializer_list<std::uint64_t> keys = {}) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// log of a Gamma(shape, 1) draw; stays finite for very small shapes.
  double log_gamma_draw(double shape);
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace dgseg
