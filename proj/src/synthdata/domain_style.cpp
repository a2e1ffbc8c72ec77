#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgseg/synthdata.hpp"

namespace dgseg {

namespace {

constexpr double kGolden = 0.6180339887498949;

// Stratum position for `domain_id` with per-parameter phase, jittered but kept in [0, 1].
double stratum(int domain_id, double phase, RandomSource& rng) {
  double u = std::fmod(phase + kGolden * domain_id, 1.0);
  u += rng.uniform(-0.04, 0.04);
  return std::clamp(u, 0.0, 1.0);
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

void DomainStyle::validate() const {
  if (!within(gamma, 0.4, 2.5)) throw std::invalid_argument("domain style: gamma outside [0.4, 2.5]");
  if (!within(brightness, -0.2, 0.2)) throw std::invalid_argument("domain style: brightness outside [-0.2, 0.2]");
  if (!within(contrast, 0.6, 1.4)) throw std::invalid_argument("domain style: contrast outside [0.6, 1.4]");
  if (!within(noise_std, 0.0, 0.1)) throw std::invalid_argument("domain style: noise_std outside [0, 0.1]");
  if (!within(bias_amplitude, 0.0, 0.3)) throw std::invalid_argument("domain style: bias_amplitude outside [0, 0.3]");
  if (!within(texture_scale, 0.0, 1.0)) throw std::invalid_argument("domain style: texture_scale outside [0, 1]");
}

DomainStyle make_domain_style(std::uint64_t global_seed, int domain_id) {
  if (domain_id < 0) throw std::invalid_argument("domain id must be non-negative");
  RandomSource rng = RandomSource(global_seed).derive("domain-style", {static_cast<std::uint64_t>(domain_id)});
  DomainStyle s;
  s.domain_id = domain_id;
  const double lg = std::log(0.4), hg = std::log(2.5);
  s.gamma = std::exp(lg + (hg - lg) * stratum(domain_id, 0.05, rng));
  s.contrast = 0.6 + 0.8 * stratum(domain_id, 0.55, rng);
  s.brightness = -0.2 + 0.4 * stratum(domain_id, 0.30, rng);
  s.noise_std = 0.1 * stratum(domain_id, 0.80, rng);
  s.bias_amplitude = 0.3 * stratum(domain_id, 0.15, rng);
  s.texture_scale = stratum(domain_id, 0.45, rng);
  s.validate();
  return s;
}

std::string to_string(LabelMode m) { return m == LabelMode::two_class ? "two-class" : "single-class"; }

LabelMode parse_label_mode(const std::string& s) {
  if (s == "two-class") return LabelMode::two_class;
  if (s == "single-class") return LabelMode::single_class;
  throw std::invalid_argument("unknown label mode '" + s + "'");
}

}  // namespace dgseg
