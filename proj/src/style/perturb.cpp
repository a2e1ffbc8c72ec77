#include <array>
#include <stdexcept>
#include <utility>

#include "dgseg/style_ops.hpp"

namespace dgseg {

namespace detail {
AugStats partner_stats(const ChannelStats& stats, const std::vector<int>& partner);
}

namespace {

constexpr std::array<std::pair<Operator, std::string_view>, 10> kOperatorTags{{
    {Operator::none, "none"},
    {Operator::trid, "trid"},
    {Operator::mixstyle, "mixstyle"},
    {Operator::efdm, "efdm"},
    {Operator::dsu, "dsu"},
    {Operator::mixstyle_sm, "mixstyle+sm"},
    {Operator::efdm_sm, "efdm+sm"},
    {Operator::trid_normal, "trid-normal"},
    {Operator::sr_only, "sr-only"},
    {Operator::sr_mixup, "sr+mixup"},
}};

MixMask forced_mask(int batch, int channels, double lambda, double alpha) {
  return MixMask{ChannelGrid(batch, channels, lambda), ChannelGrid(batch, channels, lambda), alpha};
}

MixMask channel_mask(int batch, int channels, const PerturbConfig& cfg, const PerturbControls& controls,
                     RandomSource& rng) {
  if (controls.lambda) return forced_mask(batch, channels, *controls.lambda, cfg.alpha);
  return draw_channel_mask(batch, channels, cfg.alpha, rng);
}

ShuffleMix shuffle_mix(const ChannelStats& stats, const PerturbConfig& cfg, const PerturbControls& controls,
                       RandomSource& rng) {
  if (!controls.partners && !controls.lambda) return provide_shuffle_mix(stats, cfg.alpha, rng);
  ShuffleMix m;
  const int batch = stats.batch();
  m.partner = controls.partners ? *controls.partners
                                : (batch == 1 ? std::vector<int>{0} : random_partners(batch, rng));
  m.aug = detail::partner_stats(stats, m.partner);
  m.lambda.assign(static_cast<std::size_t>(batch), 1.0);
  if (controls.lambda) {
    m.lambda.assign(static_cast<std::size_t>(batch), *controls.lambda);
  } else if (batch > 1) {
    for (double& l : m.lambda) l = rng.beta(cfg.alpha, cfg.alpha);
  }
  return m;
}

std::vector<double> sample_weights(int batch, const PerturbConfig& cfg, const PerturbControls& controls,
                                   RandomSource& rng) {
  std::vector<double> w(static_cast<std::size_t>(batch));
  for (double& v : w) v = controls.lambda ? *controls.lambda : rng.beta(cfg.alpha, cfg.alpha);
  return w;
}

}  // namespace

Operator parse_operator(std::string_view tag) {
  for (const auto& [op, name] : kOperatorTags) {
    if (name == tag) return op;
  }
  throw std::invalid_argument("unknown perturbation operator '" + std::string(tag) + "'");
}

std::string to_string(Operator op) {
  for (const auto& [o, name] : kOperatorTags) {
    if (o == op) return std::string(name);
  }
  return "unknown";
}

const std::vector<Operator>& all_operators() {
  static const std::vector<Operator> ops = [] {
    std::vector<Operator> v;
    for (const auto& [op, name] : kOperatorTags) v.push_back(op);
    return v;
  }();
  return ops;
}

void PerturbConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("perturb: p must lie in [0, 1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("perturb: alpha must be positive");
  if (!(normal_std >= 0.0)) throw std::invalid_argument("perturb: normal_std must be non-negative");
  if (!(eps > 0.0)) throw std::invalid_argument("perturb: eps must be positive");
}

template <typename T>
Tensor<T> efdm_perturb(const Tensor<T>& f, const PerturbConfig& cfg, RandomSource& rng,
                       const PerturbControls& controls) {
  const int batch = f.batch();
  const int channels = f.channels();
  if (batch == 1) return f;
  const std::vector<int> partner = controls.partners ? *controls.partners : random_partners(batch, rng);
  if (static_cast<int>(partner.size()) != batch) throw std::invalid_argument("efdm: partner list length");
  const bool channel_wise = cfg.op == Operator::efdm_sm;
  MixMask mask;
  std::vector<double> weights;
  if (channel_wise) {
    mask = channel_mask(batch, channels, cfg, controls, rng);
  } else {
    weights = sample_weights(batch, cfg, controls, rng);
  }

  Tensor<T> out(f.shape());
  for (int b = 0; b < batch; ++b) {
    const int j = partner[b];
    if (j < 0 || j >= batch) throw std::invalid_argument("efdm: partner index out of range");
    for (int c = 0; c < channels; ++c) {
      const auto src = f.channel(b, c);
      auto dst = out.channel(b, c);
      const double w = channel_wise ? mask.lambda(b, c) : weights[b];
      if (w == 0.0) {
        std::copy(src.begin(), src.end(), dst.begin());
        continue;
      }
      const std::vector<T> matched = rank_match<T>(src, f.channel(j, c));
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<T>((1.0 - w) * static_cast<double>(src[i]) + w * static_cast<double>(matched[i]));
      }
    }
  }
  return out;
}

template <typename T>
PerturbResult<T> perturb(const Tensor<T>& f, const PerturbConfig& cfg, Mode mode, RandomSource& rng,
                         const PerturbControls& controls) {
  PerturbResult<T> r;
  if (mode == Mode::eval || cfg.op == Operator::none) {
    r.output = f;
    return r;
  }
  const bool open = controls.gate_open ? *controls.gate_open : rng.uniform() < cfg.p;
  if (!open) {
    r.output = f;
    return r;
  }
  check_feature_batch(f);
  r.applied = true;

  if (cfg.op == Operator::efdm || cfg.op == Operator::efdm_sm) {
    r.output = efdm_perturb(f, cfg, rng, controls);
    return r;
  }

  ChannelStats stats = channel_mean_std(f, cfg.eps);
  const int batch = f.batch();
  const int channels = f.channels();
  AugStats aug;
  MixedStats mixed;
  switch (cfg.op) {
    case Operator::trid:
      aug = provide_uniform(batch, channels, rng);
      mixed = mix_with_mask(stats, aug, channel_mask(batch, channels, cfg, controls, rng));
      break;
    case Operator::sr_only:
      aug = provide_uniform(batch, channels, rng);
      mixed = mix_with_mask(stats, aug, forced_mask(batch, channels, controls.lambda.value_or(1.0), cfg.alpha));
      break;
    case Operator::sr_mixup:
      aug = provide_uniform(batch, channels, rng);
      mixed = batch_mixup(stats, aug, sample_weights(batch, cfg, controls, rng));
      break;
    case Operator::trid_normal:
      aug = provide_normal_ablation(batch, channels, cfg.normal_mean, cfg.normal_std, rng);
      mixed = mix_with_mask(stats, aug, channel_mask(batch, channels, cfg, controls, rng));
      break;
    case Operator::mixstyle: {
      ShuffleMix sm = shuffle_mix(stats, cfg, controls, rng);
      aug = std::move(sm.aug);
      mixed = batch_mixup(stats, aug, sm.lambda);
      break;
    }
    case Operator::mixstyle_sm: {
      ShuffleMix sm = shuffle_mix(stats, cfg, controls, rng);
      aug = std::move(sm.aug);
      mixed = mix_with_mask(stats, aug, channel_mask(batch, channels, cfg, controls, rng));
      break;
    }
    case Operator::dsu:
      aug = provide_dsu(stats, rng);
      mixed = mix_with_mask(stats, aug, forced_mask(batch, channels, controls.lambda.value_or(1.0), cfg.alpha));
      break;
    default:
      throw std::logic_error("perturb: unhandled operator " + to_string(cfg.op));
  }

  r.output = apply_affine(normalize(f, stats), mixed.gamma, mixed.beta);
  r.grad_scale = ChannelGrid(batch, channels);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) r.grad_scale(b, c) = mixed.gamma(b, c) / stats.std(b, c);
  }
  r.stats = std::move(stats);
  r.mixed = std::move(mixed);
  r.aug = std::move(aug);
  return r;
}

template <typename T>
Tensor<T> perturb_backward(const PerturbResult<T>& result, Tensor<T> grad_out) {
  if (result.grad_scale.values().empty()) return grad_out;
  if (result.grad_scale.batch() != grad_out.batch() || result.grad_scale.channels() != grad_out.channels()) {
    throw std::invalid_argument("perturb_backward: gradient shape does not match forward");
  }
  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      const T s = static_cast<T>(result.grad_scale(b, c));
      for (T& g : grad_out.channel(b, c)) g *= s;
    }
  }
  return grad_out;
}

#define DGSEG_INSTANTIATE(T)                                                                               \
  template PerturbResult<T> perturb<T>(const Tensor<T>&, const PerturbConfig&, Mode, RandomSource&,      \
                                       const PerturbControls&);                                           \
  template Tensor<T> efdm_perturb<T>(const Tensor<T>&, const PerturbConfig&, RandomSource&,              \
                                     const PerturbControls&);                                             \
  template Tensor<T> perturb_backward<T>(const PerturbResult<T>&, Tensor<T>);

DGSEG_INSTANTIATE(float)
DGSEG_INSTANTIATE(double)
#undef DGSEG_INSTANTIATE

}  // namespace dgseg
