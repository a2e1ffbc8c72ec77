#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgseg/metrics.hpp"
#include "dgseg/network.hpp"
#include "dgseg/synthdata.hpp"
#include "dgseg/training.hpp"
#include "json.hpp"

namespace dgseg {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Protocol { lodo, intra_domain, deepall, single_source };
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);

struct ExperimentConfig {
  std::string name;              // table label; defaults to the operator tag
  std::string dataset = "data";  // relative to the workdir
  Protocol protocol = Protocol::lodo;
  PerturbConfig perturb;
  NetworkConfig network;
  TrainSchedule schedule;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "runs/default";  // relative to the workdir
  int source_domain = 0;                // single-source protocol only
  int eval_batch = 8;

  /// Perturbation actually used for training: the deepall protocol is
  /// perturbation-free by definition.
  PerturbConfig effective_perturb() const;
  std::string label() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Applies `key=value` with a dotted key path. The value is parsed as JSON
/// when possible, otherwise taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Hex FNV-1a of the canonical config JSON, ignoring `name` and `output`.
std::string config_hash(const ExperimentConfig& cfg);

// Training ----------------------------------------------------------------------------

struct Batch {
  Tensor<float> images;
  LabelBatch labels;
};
Batch make_batch(const std::vector<const Sample*>& samples, std::size_t begin, std::size_t end);

/// Independent streams of one fold. Only `perturb` depends on the operator's
/// use of randomness, so runs that differ only in the operator see identical
/// initial weights and batch orders.
struct FoldStreams {
  RandomSource init;
  RandomSource data;
  RandomSource perturb;
  static FoldStreams make(std::uint64_t seed, std::uint64_t fold);
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

Network<float> train_model(const std::vector<const Sample*>& train, const ExperimentConfig& cfg, int num_classes,
                           const FoldStreams& streams, TrainLog* log = nullptr,
                           const std::function<void(int, double)>& on_epoch = {});

/// Eval-mode prediction (argmax over classes) for each sample.
std::vector<std::vector<std::uint8_t>> predict(Network<float>& net, const std::vector<const Sample*>& samples,
                                               int batch_size);

/// Per-domain, per-class metrics. Two-class labels evaluate "outer" as labels
/// {1, 2} (disc including cup) and "inner" as {2}; single-class evaluates "fg" as {1}.
std::vector<MetricEntry> evaluate(Network<float>& net, const std::vector<const Sample*>& samples, LabelMode mode,
                                  const std::string& fold, int batch_size);

// Protocols -----------------------------------------------------------------------------

struct RunResult {
  nlohmann::ordered_json report;        // consolidated, byte-stable
  std::vector<MetricsReport> per_seed;  // aligned with cfg.seeds
  std::vector<std::string> failures;    // "seed S fold F: message"
  std::filesystem::path output_dir;
  /// Wall time of the training and evaluation that produced the report (also
  /// stored beside it in timing.json, so reused runs keep it).
  double seconds = 0.0;

  double mean_dsc() const;
  bool ok() const { return failures.empty(); }
};

struct RunOptions {
  /// Reuse an existing report.json whose config and dataset hashes match.
  bool reuse = false;
  std::function<void(const std::string&)> log;
};

/// Runs every seed of `cfg` under `workdir`, writing checkpoints, per-fold
/// JSON and `report.json` into the output directory.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& workdir, const RunOptions& opts = {});
RunResult run_lodo(ExperimentConfig cfg, const std::filesystem::path& workdir, const RunOptions& opts = {});
RunResult run_intra_domain(ExperimentConfig cfg, const std::filesystem::path& workdir, const RunOptions& opts = {});

enum class Suite { sr_vs_sm, location, distribution, sm_extendibility };
Suite parse_suite(const std::string& s);
std::string to_string(Suite s);

/// The configurations a suite sweeps: `base` with one axis varied.
std::vector<ExperimentConfig> suite_variants(const ExperimentConfig& base, Suite suite);

struct SuiteResult {
  std::vector<RunResult> runs;
  std::string table_markdown;
  bool ok() const;
};

SuiteResult run_ablation_suite(const ExperimentConfig& base, Suite suite, const std::filesystem::path& workdir,
                               const RunOptions& opts = {});

// Statistics export and reporting -----------------------------------------------------------

/// Eval-mode forward over every sample of the dataset (train and test, all
/// domains), recording per-channel statistics of the given stage output.
std::size_t export_feature_stats(const std::filesystem::path& checkpoint, const Dataset& dataset, int stage,
                                 const std::filesystem::path& out_csv, int batch_size = 8);
int parse_stage(const std::string& block);  // "res1".."res4" -> 1..4

struct ComparisonTables {
  std::string markdown;
  std::string csv;
  std::string svg;
  std::vector<std::string> footnotes;
};

/// Comparison of consolidated run reports: one row per run, per-domain DSC
/// cells plus pooled and per-class averages. Throws if dataset hashes differ.
ComparisonTables compare_runs(const std::vector<nlohmann::json>& reports);
/// Reads `<dir>/report.json` for each dir, writes comparison.{md,csv} and dsc_by_domain.svg into `out`.
ComparisonTables write_report(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out);

/// Grouped bar chart (groups = domains, bars = methods) as standalone SVG.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<std::optional<double>>>& values);

}  // namespace dgseg
