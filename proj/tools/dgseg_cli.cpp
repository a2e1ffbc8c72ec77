// Command-line front end for data generation, training runs, ablation
// suites, statistics export and report generation.
//
// Exit codes: 0 success, 1 a fold or run failed, 2 configuration error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "dgseg/experiment.hpp"

namespace fs = std::filesystem;
using namespace dgseg;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

void log_line(const std::string& m) { std::cerr << m << "\n"; }

int finish(const RunResult& r) {
  std::cout << r.report.at("label").get<std::string>() << ": mean DSC " << r.mean_dsc() << " -> "
            << (r.output_dir / "report.json").string() << "\n";
  for (const auto& f : r.failures) std::cerr << "failed: " << f << "\n";
  return r.ok() ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-statistics domain randomization for 2-D segmentation"};
  app.require_subcommand(1);
  std::string workdir;
  app.add_option("--workdir", workdir, "Directory all other paths are relative to")->required();

  std::string config_path;
  std::vector<std::string> overrides;
  bool reuse = false;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "Experiment config JSON (relative to the workdir)");
    sub->add_option("--set", overrides, "Override a config field, e.g. --set schedule.epochs=10");
    sub->add_flag("--reuse", reuse, "Skip runs whose report matches config and dataset hashes");
  };

  GenerateOptions gen;
  std::string gen_out = "data";
  std::string label_mode = "two-class";
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic multi-domain dataset");
  gen_cmd->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--domains", gen.num_domains, "Number of domains K")->capture_default_str();
  gen_cmd->add_option("--per-domain", gen.per_domain, "Samples per domain")->capture_default_str();
  gen_cmd->add_option("--size", gen.image_size, "Image side length")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--label-mode", label_mode, "two-class or single-class")->capture_default_str();
  gen_cmd->add_flag("--overwrite", gen.overwrite, "Replace an existing dataset");

  auto* train_cmd = app.add_subcommand("train", "Run the protocol named in the config");
  add_config(train_cmd);
  auto* lodo_cmd = app.add_subcommand("lodo", "Leave-one-domain-out run");
  add_config(lodo_cmd);
  auto* intra_cmd = app.add_subcommand("intra", "Train and test within each domain");
  add_config(intra_cmd);
  std::string suite_name;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation suite");
  add_config(ablate_cmd);
  ablate_cmd->add_option("--suite", suite_name, "sr-vs-sm, location, distribution or sm-extendibility")->required();

  std::string ckpt, dataset_dir = "data", block = "res1", stats_out = "stats.csv";
  int stats_batch = 8;
  auto* export_cmd = app.add_subcommand("export-stats", "Per-channel feature statistics of a trained model");
  export_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  export_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->capture_default_str();
  export_cmd->add_option("--block", block, "res1..res4")->capture_default_str();
  export_cmd->add_option("--out", stats_out, "CSV output")->capture_default_str();
  export_cmd->add_option("--batch", stats_batch, "Batch size")->capture_default_str();

  std::vector<std::string> run_dirs;
  std::string report_out = "report";
  auto* report_cmd = app.add_subcommand("report", "Comparison tables and bar chart from run directories");
  report_cmd->add_option("runs", run_dirs, "Run output directories")->required();
  report_cmd->add_option("--out", report_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  const fs::path wd(workdir);
  const auto config = [&] { return load_config(config_path.empty() ? fs::path() : wd / config_path, overrides); };
  try {
    if (*gen_cmd) {
      gen.label_mode = parse_label_mode(label_mode);
      const auto m = generate_dataset(gen, wd / gen_out);
      std::cout << "wrote " << m.train.size() + m.test.size() << " samples to " << (wd / gen_out).string() << "\n";
      return kOk;
    }
    RunOptions opts{reuse, log_line};
    if (*train_cmd) return finish(run_experiment(config(), wd, opts));
    if (*lodo_cmd) return finish(run_lodo(config(), wd, opts));
    if (*intra_cmd) return finish(run_intra_domain(config(), wd, opts));
    if (*ablate_cmd) {
      const Suite suite = parse_suite(suite_name);
      const auto result = run_ablation_suite(config(), suite, wd, opts);
      std::cout << result.table_markdown;
      for (const auto& r : result.runs) {
        for (const auto& f : r.failures) std::cerr << "failed: " << r.report.at("label").get<std::string>() << " " << f << "\n";
      }
      return result.ok() ? kOk : kFailed;
    }
    if (*export_cmd) {
      const int stage = parse_stage(block);
      const Dataset ds = load_dataset(wd / dataset_dir);
      const auto rows = export_feature_stats(wd / ckpt, ds, stage, wd / stats_out, stats_batch);
      std::cout << "wrote " << rows << " records to " << (wd / stats_out).string() << "\n";
      return kOk;
    }
    if (*report_cmd) {
      std::vector<fs::path> dirs;
      for (const auto& d : run_dirs) dirs.push_back(wd / d);
      const auto tables = write_report(dirs, wd / report_out);
      std::cout << tables.markdown;
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
