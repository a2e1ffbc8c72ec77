#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgseg/channel_stats.hpp"
#include "dgseg/random_source.hpp"
#include "dgseg/tensor.hpp"

namespace dgseg {

/// Feature-statistics perturbation operators.
///
///   trid         uniform statistics, channel-wise Bernoulli mixing with the originals
///   sr_only      uniform statistics, full replacement
///   sr_mixup     uniform statistics, batch-wise convex fusion
///   trid_normal  Normal(mean, std) statistics, channel-wise mixing
///   mixstyle     partner-sample statistics, batch-wise convex fusion
///   mixstyle_sm  partner-sample statistics, channel-wise mixing
///   dsu          Gaussian resampling around the originals, full replacement
///   efdm         exact histogram matching to a partner, batch-wise fusion
///   efdm_sm      exact histogram matching, channel-wise selection
///   none         identity (perturbation-free baseline)
enum class Operator { none, trid, mixstyle, efdm, dsu, mixstyle_sm, efdm_sm, trid_normal, sr_only, sr_mixup };

Operator parse_operator(std::string_view tag);
std::string to_string(Operator op);
const std::vector<Operator>& all_operators();

struct PerturbConfig {
  Operator op = Operator::trid;
  double p = 0.5;
  double alpha = 0.1;
  double normal_mean = 0.5;
  double normal_std = 1.0;
  double eps = kDefaultStatsEps;

  /// Throws std::invalid_argument on p outside [0, 1], alpha <= 0 or normal_std < 0.
  void validate() const;
};

enum class Mode { train, eval };

enum class Provenance { uniform, shuffle_mix, dsu, normal_ablation };
std::string to_string(Provenance p);

/// Replacement statistics proposed by a provider.
struct AugStats {
  ChannelGrid sigma;
  ChannelGrid mu;
  Provenance provenance = Provenance::uniform;
  /// Set when the provider fell back to the original statistics (B = 1).
  bool degenerate = false;
};

struct MixMask {
  ChannelGrid probability;  // P ~ Beta(alpha, alpha)
  ChannelGrid lambda;       // lambda ~ Bernoulli(P), or continuous weights for batch fusion
  double alpha = 0.1;
};

struct MixedStats {
  ChannelGrid gamma;
  ChannelGrid beta;
  MixMask mask;
};

struct ShuffleMix {
  AugStats aug;
  std::vector<double> lambda;  // per sample, Beta(alpha, alpha); 1 when degenerate
  std::vector<int> partner;
};

// Statistics providers -------------------------------------------------------

AugStats provide_uniform(int batch, int channels, RandomSource& rng);
ShuffleMix provide_shuffle_mix(const ChannelStats& stats, double alpha, RandomSource& rng);
AugStats provide_dsu(const ChannelStats& stats, RandomSource& rng);
AugStats provide_normal_ablation(int batch, int channels, double mean, double stddev, RandomSource& rng);

/// Uniform random permutation of [0, n) (Fisher-Yates). Fixed points allowed.
std::vector<int> random_partners(int n, RandomSource& rng);

// Mixing strategies -----------------------------------------------------------

/// P ~ Beta(alpha, alpha), lambda ~ Bernoulli(P), both B x C.
MixMask draw_channel_mask(int batch, int channels, double alpha, RandomSource& rng);
/// gamma = lambda * sigma_r + (1 - lambda) * sigma(f); same for beta with means.
MixedStats mix_with_mask(const ChannelStats& orig, const AugStats& aug, MixMask mask);
MixedStats sm_mix(const ChannelStats& orig, const AugStats& aug, double alpha, RandomSource& rng);
/// Batch-wise convex fusion: lambda_m[b] weights the original statistics.
MixedStats batch_mixup(const ChannelStats& orig, const AugStats& aug, const std::vector<double>& lambda_m);

// Perturbation ----------------------------------------------------------------

/// Pins random choices that `perturb` would otherwise draw. Empty fields draw
/// normally. Used by tests and by callers that must force a gate.
struct PerturbControls {
  std::optional<bool> gate_open;
  std::optional<double> lambda;  // every mixing weight / Bernoulli outcome
  std::optional<std::vector<int>> partners;
};

/// Output of a perturbation plus what backward needs.
///
/// With statistics, provider draws and masks held constant, every operator has
/// a diagonal Jacobian whose entries depend only on (b, c): gamma/sigma(f) for
/// the statistics-replacement operators, 1 for the histogram-matching ones.
/// `grad_scale` holds those entries; it is empty when the input was returned
/// unchanged (identity Jacobian).
template <typename T>
struct PerturbResult {
  Tensor<T> output;
  bool applied = false;
  ChannelGrid grad_scale;
  std::optional<ChannelStats> stats;
  std::optional<MixedStats> mixed;
  std::optional<AugStats> aug;
};

template <typename T>
PerturbResult<T> perturb(const Tensor<T>& f, const PerturbConfig& cfg, Mode mode, RandomSource& rng,
                         const PerturbControls& controls = {});

/// Histogram-matching perturbation (gate assumed open).
/// out = f + lambda_m * stop_gradient(matched - f).
template <typename T>
Tensor<T> efdm_perturb(const Tensor<T>& f, const PerturbConfig& cfg, RandomSource& rng,
                       const PerturbControls& controls = {});

/// grad_in = grad_out * result.grad_scale[b, c]; identity when no scale was recorded.
template <typename T>
Tensor<T> perturb_backward(const PerturbResult<T>& result, Tensor<T> grad_out);

}  // namespace dgseg
