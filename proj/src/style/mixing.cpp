#include <stdexcept>

#include "dgseg/style_ops.hpp"

namespace dgseg {

MixMask draw_channel_mask(int batch, int channels, double alpha, RandomSource& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("channel mask: alpha must be positive");
  MixMask m{ChannelGrid(batch, channels), ChannelGrid(batch, channels), alpha};
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const double p = rng.beta(alpha, alpha);
      m.probability(b, c) = p;
      m.lambda(b, c) = rng.bernoulli(p) ? 1.0 : 0.0;
    }
  }
  return m;
}

MixedStats mix_with_mask(const ChannelStats& orig, const AugStats& aug, MixMask mask) {
  if (!orig.mean.same_shape(aug.mu) || !orig.std.same_shape(aug.sigma) || !orig.mean.same_shape(mask.lambda)) {
    throw std::invalid_argument("mix: statistics and mask shapes disagree");
  }
  MixedStats m{ChannelGrid(orig.batch(), orig.channels()), ChannelGrid(orig.batch(), orig.channels()),
               std::move(mask)};
  for (int b = 0; b < orig.batch(); ++b) {
    for (int c = 0; c < orig.channels(); ++c) {
      const double l = m.mask.lambda(b, c);
      m.gamma(b, c) = l * aug.sigma(b, c) + (1.0 - l) * orig.std(b, c);
      m.beta(b, c) = l * aug.mu(b, c) + (1.0 - l) * orig.mean(b, c);
    }
  }
  return m;
}

MixedStats sm_mix(const ChannelStats& orig, const AugStats& aug, double alpha, RandomSource& rng) {
  return mix_with_mask(orig, aug, draw_channel_mask(orig.batch(), orig.channels(), alpha, rng));
}

// lambda_m weights the original statistics. The recorded mask holds the
// complementary weight on the augmented statistics, so that
// gamma = mask.lambda * sigma_r + (1 - mask.lambda) * sigma(f) for every mixer.
MixedStats batch_mixup(const ChannelStats& orig, const AugStats& aug, const std::vector<double>& lambda_m) {
  if (static_cast<int>(lambda_m.size()) != orig.batch()) {
    throw std::invalid_argument("batch mixup: one weight per sample required");
  }
  MixMask mask{ChannelGrid(orig.batch(), orig.channels()), ChannelGrid(orig.batch(), orig.channels()), 0.0};
  for (int b = 0; b < orig.batch(); ++b) {
    const double w = lambda_m[b];
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("batch mixup: weight outside [0, 1]");
    for (int c = 0; c < orig.channels(); ++c) {
      mask.lambda(b, c) = 1.0 - w;
      mask.probability(b, c) = 1.0 - w;
    }
  }
  return mix_with_mask(orig, aug, std::move(mask));
}

}  // namespace dgseg
