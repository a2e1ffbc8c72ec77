#include <cmath>
#include <stdexcept>
#include <utility>

#include "dgseg/style_ops.hpp"

namespace dgseg {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::uniform: return "uniform";
    case Provenance::shuffle_mix: return "shuffle-mix";
    case Provenance::dsu: return "dsu";
    case Provenance::normal_ablation: return "normal-ablation";
  }
  return "unknown";
}

AugStats provide_uniform(int batch, int channels, RandomSource& rng) {
  AugStats a{ChannelGrid(batch, channels), ChannelGrid(batch, channels), Provenance::uniform, false};
  // sigma_r and mu_r are interleaved per (b, c): sigma first.
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      a.sigma(b, c) = rng.uniform();
      a.mu(b, c) = rng.uniform();
    }
  }
  return a;
}

std::vector<int> random_partners(int n, RandomSource& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

namespace detail {

AugStats partner_stats(const ChannelStats& stats, const std::vector<int>& partner) {
  const int batch = stats.batch();
  if (static_cast<int>(partner.size()) != batch) {
    throw std::invalid_argument("partner list length does not match batch");
  }
  AugStats a{ChannelGrid(batch, stats.channels()), ChannelGrid(batch, stats.channels()),
             Provenance::shuffle_mix, false};
  for (int b = 0; b < batch; ++b) {
    const int j = partner[b];
    if (j < 0 || j >= batch) throw std::invalid_argument("partner index out of range");
    for (int c = 0; c < stats.channels(); ++c) {
      a.sigma(b, c) = stats.std(j, c);
      a.mu(b, c) = stats.mean(j, c);
    }
  }
  return a;
}

}  // namespace detail

ShuffleMix provide_shuffle_mix(const ChannelStats& stats, double alpha, RandomSource& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("shuffle-mix: alpha must be positive");
  const int batch = stats.batch();
  if (batch == 1) {
    ShuffleMix m{AugStats{stats.std, stats.mean, Provenance::shuffle_mix, true}, {1.0}, {0}};
    return m;
  }
  ShuffleMix m;
  m.partner = random_partners(batch, rng);
  m.aug = detail::partner_stats(stats, m.partner);
  m.lambda.resize(static_cast<std::size_t>(batch));
  for (double& l : m.lambda) l = rng.beta(alpha, alpha);
  return m;
}

AugStats provide_dsu(const ChannelStats& stats, RandomSource& rng) {
  const int batch = stats.batch();
  const int channels = stats.channels();
  AugStats a{stats.std, stats.mean, Provenance::dsu, batch == 1};
  if (batch == 1) return a;
  std::vector<double> spread_mu(static_cast<std::size_t>(channels));
  std::vector<double> spread_sigma(static_cast<std::size_t>(channels));
  auto batch_std = [&](const ChannelGrid& g, int c) {
    double m = 0.0;
    for (int b = 0; b < batch; ++b) m += g(b, c);
    m /= batch;
    double ss = 0.0;
    for (int b = 0; b < batch; ++b) ss += (g(b, c) - m) * (g(b, c) - m);
    return std::sqrt(ss / (batch - 1));
  };
  for (int c = 0; c < channels; ++c) {
    spread_mu[c] = batch_std(stats.mean, c);
    spread_sigma[c] = batch_std(stats.std, c);
  }
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const double e_mu = rng.normal();
      const double e_sigma = rng.normal();
      a.mu(b, c) = stats.mean(b, c) + e_mu * spread_mu[c];
      a.sigma(b, c) = stats.std(b, c) + e_sigma * spread_sigma[c];
    }
  }
  return a;
}

AugStats provide_normal_ablation(int batch, int channels, double mean, double stddev, RandomSource& rng) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("normal ablation: stddev must be non-negative");
  AugStats a{ChannelGrid(batch, channels), ChannelGrid(batch, channels), Provenance::normal_ablation, false};
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      a.sigma(b, c) = rng.normal(mean, stddev);
      a.mu(b, c) = rng.normal(mean, stddev);
    }
  }
  return a;
}

}  // namespace dgseg
