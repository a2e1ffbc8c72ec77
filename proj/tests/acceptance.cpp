// Benchmark-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. Training runs are written under --workdir and
// reused on later invocations when config and dataset hashes match.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dgseg/experiment.hpp"
#include "dgseg/stats_export.hpp"
#include "dgseg/style_ops.hpp"

using namespace dgseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> outcomes;

void record(const std::string& name, bool pass, const std::string& detail) {
  outcomes.push_back({name, pass, detail});
  std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct SuiteRun {
  int status = -1;
  int cases = 0;
  int failed = 0;
  double seconds = 0;
};

// Runs a doctest binary and parses its summary line.
SuiteRun run_suite(const std::string& binary) {
  SuiteRun r;
  const auto t0 = Clock::now();
  FILE* pipe = ::popen(("\"" + binary + "\" 2>&1").c_str(), "r");
  if (!pipe) return r;
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  r.status = ::pclose(pipe);
  r.seconds = seconds_since(t0);
  std::smatch m;
  if (std::regex_search(out, m, std::regex(R"(test cases:\s*(\d+)\s*\|\s*(\d+) passed\s*\|\s*(\d+) failed)"))) {
    r.cases = std::stoi(m[1]);
    r.failed = std::stoi(m[3]);
  }
  if (r.status != 0) std::cerr << out;
  return r;
}

void suite_criterion(const std::string& name, const std::vector<std::string>& binaries, double budget_s) {
  int cases = 0, failed = 0;
  double seconds = 0;
  bool ok = true;
  for (const auto& b : binaries) {
    const auto r = run_suite(b);
    cases += r.cases;
    failed += r.failed;
    seconds += r.seconds;
    ok = ok && r.status == 0 && r.cases > 0;
  }
  ok = ok && failed == 0 && seconds <= budget_s;
  record(name, ok,
         std::to_string(cases - failed) + "/" + std::to_string(cases) + " cases passed in " +
             fmt("%.1f s (budget %.0f s)", seconds, budget_s));
}

std::string points(double a) { return fmt("%.2f", 100.0 * a); }

void ensure_dataset(const fs::path& workdir) {
  GenerateOptions g;  // K = 4, 50 per domain, seed 0
  g.image_size = 64;
  const fs::path dir = workdir / "data";
  if (fs::exists(dir / "manifest.json")) {
    try {
      const auto ds = load_dataset(dir);
      const auto& m = ds.manifest;
      if (m.num_domains == g.num_domains && m.image_size == g.image_size && m.seed == g.seed &&
          m.per_domain == std::vector<int>(g.num_domains, g.per_domain))
        return;
    } catch (const std::exception& e) {
      std::cerr << "regenerating dataset: " << e.what() << "\n";
    }
  }
  g.overwrite = true;
  generate_dataset(g, dir);
}

// Benchmark configuration shared by every training criterion.
ExperimentConfig benchmark_config() {
  ExperimentConfig c;
  c.network.stage_widths = {8, 16, 32, 64};
  c.network.blocks_per_stage = 1;
  c.schedule.epochs = 40;
  c.schedule.l0 = 0.01;
  c.seeds = {0, 1, 2};
  return c;
}

RunResult run_named(ExperimentConfig c, const std::string& name, Operator op, const fs::path& workdir,
                    const RunOptions& opts) {
  c.name = name;
  c.perturb.op = op;
  if (name == "deepall") c.protocol = Protocol::deepall;
  c.output = "runs/" + name;
  const auto t0 = Clock::now();
  auto r = run_experiment(c, workdir, opts);
  std::cerr << name << ": mean DSC " << points(r.mean_dsc()) << " (" << fmt("%.0f s", seconds_since(t0)) << ")\n";
  return r;
}

// Fig. 1 analog on exported statistics.
void feature_clusters(const fs::path& csv) {
  const auto rows = read_stats_csv(csv);
  std::map<std::string, std::map<int, std::vector<double>>> vec;  // domain -> sample -> (mu, sigma) per channel
  int channels = 0;
  for (const auto& r : rows) {
    auto& v = vec[r.domain][r.sample];
    v.push_back(r.mean);
    v.push_back(r.std);
    channels = std::max(channels, r.channel + 1);
  }

  // Uniform provider coverage of each channel's search space, next to the
  // fraction of deciles the real statistics occupy.
  RandomSource rng(0);
  const auto aug = provide_uniform(10000, channels, rng);
  bool covered = true;
  double real_cover = 0;
  for (int c = 0; c < channels; ++c) {
    std::set<int> mu_d, sd_d, real_mu, real_sd;
    for (int b = 0; b < 10000; ++b) {
      mu_d.insert(static_cast<int>(aug.mu(b, c) * 10));
      sd_d.insert(static_cast<int>(aug.sigma(b, c) * 10));
    }
    covered = covered && mu_d.size() == 10 && sd_d.size() == 10;
    for (const auto& r : rows) {
      if (r.channel != c) continue;
      if (r.mean >= 0 && r.mean < 1) real_mu.insert(static_cast<int>(r.mean * 10));
      if (r.std >= 0 && r.std < 1) real_sd.insert(static_cast<int>(r.std * 10));
    }
    real_cover += (real_mu.size() + real_sd.size()) / 20.0;
  }
  real_cover /= channels;

  // Centroids and within-domain spread (mean distance to the centroid).
  std::map<std::string, std::vector<double>> centroid;
  std::map<std::string, double> spread;
  for (const auto& [d, samples] : vec) {
    std::vector<double> c(2 * channels, 0.0);
    for (const auto& [s, v] : samples)
      for (std::size_t k = 0; k < v.size(); ++k) c[k] += v[k] / samples.size();
    double sp = 0;
    for (const auto& [s, v] : samples) {
      double d2 = 0;
      for (std::size_t k = 0; k < v.size(); ++k) d2 += (v[k] - c[k]) * (v[k] - c[k]);
      sp += std::sqrt(d2) / samples.size();
    }
    centroid[d] = c;
    spread[d] = sp;
  }
  double min_ratio = INFINITY;
  std::string worst;
  for (auto a = centroid.begin(); a != centroid.end(); ++a) {
    for (auto b = std::next(a); b != centroid.end(); ++b) {
      double d2 = 0;
      for (std::size_t k = 0; k < a->second.size(); ++k) d2 += std::pow(a->second[k] - b->second[k], 2);
      const double ratio = std::sqrt(d2) / (0.5 * (spread[a->first] + spread[b->first]));
      if (ratio < min_ratio) {
        min_ratio = ratio;
        worst = a->first + "/" + b->first;
      }
    }
  }
  const bool ok = covered && centroid.size() >= 2 && min_ratio > 1.0;
  record("feature statistics cluster by domain; uniform provider covers every decile", ok,
         "uniform deciles " + std::string(covered ? "all hit" : "MISSED") +
             fmt(", real statistics occupy %.0f%% of deciles; min between/within ratio %.2f", 100 * real_cover,
                 min_ratio) +
             " (" + worst + ", " + std::to_string(rows.size()) + " rows)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string workdir_s;
  app.add_option("--workdir", workdir_s, "Working directory for datasets and runs")->required();
  CLI11_PARSE(app, argc, argv);
  const fs::path workdir = workdir_s;
  fs::create_directories(workdir);
  const auto start = Clock::now();

  suite_criterion("operator invariant suite", {DGSEG_TEST_TENSOR, DGSEG_TEST_STYLE_OPS}, 60);
  suite_criterion("gradient suite", {DGSEG_TEST_GRADIENTS}, 120);
  suite_criterion("metric oracle suite", {DGSEG_TEST_METRICS}, 60);

  try {
    ensure_dataset(workdir);
    RunOptions opts;
    opts.reuse = true;
    opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
    const auto base = benchmark_config();

    const auto deepall = run_named(base, "deepall", Operator::none, workdir, opts);
    const auto trid = run_named(base, "trid", Operator::trid, workdir, opts);
    // Training time of the two runs, read back from timing.json when reused.
    const double trend_s = deepall.seconds + trid.seconds;
    const double gap = 100.0 * (trid.mean_dsc() - deepall.mean_dsc());
    record("trend: TriD exceeds DeepAll by >= 2 DSC points (3 seeds, LODO)",
           deepall.ok() && trid.ok() && gap >= 2.0 && trend_s <= 45 * 60,
           "TriD " + points(trid.mean_dsc()) + " vs DeepAll " + points(deepall.mean_dsc()) + fmt(", gap %+.2f", gap) +
               fmt(" (%.0f s of training)", trend_s));

    const auto normal = run_named(base, "trid-normal", Operator::trid_normal, workdir, opts);
    const double dgap = 100.0 * (trid.mean_dsc() - normal.mean_dsc());
    record("distribution: uniform >= normal(0.5,1) - 0.5 points", trid.ok() && normal.ok() && dgap >= -0.5,
           "uniform " + points(trid.mean_dsc()) + " vs normal " + points(normal.mean_dsc()) + fmt(", gap %+.2f", dgap));

    const auto sr = run_named(base, "sr-only", Operator::sr_only, workdir, opts);
    const auto srm = run_named(base, "sr+mixup", Operator::sr_mixup, workdir, opts);
    const double g1 = 100.0 * (trid.mean_dsc() - srm.mean_dsc());
    const double g2 = 100.0 * (sr.mean_dsc() - deepall.mean_dsc());
    record("SR vs SM: TriD >= SR+Mixup and SR-only >= DeepAll + 1 point",
           sr.ok() && srm.ok() && g1 >= 0.0 && g2 >= 1.0,
           "TriD " + points(trid.mean_dsc()) + " vs SR+Mixup " + points(srm.mean_dsc()) + fmt(" (%+.2f); ", g1) +
               "SR-only " + points(sr.mean_dsc()) + " vs DeepAll " + points(deepall.mean_dsc()) +
               fmt(" (%+.2f)", g2));
    write_report({workdir / "runs/deepall", workdir / "runs/sr-only", workdir / "runs/sr+mixup", workdir / "runs/trid",
                  workdir / "runs/trid-normal"},
                 workdir / "report-main");

    // Insertion location smoke run at one seed; the ordering is reported only.
    auto loc = base;
    loc.seeds = {0};
    loc.output = "runs/location";
    const auto suite = run_ablation_suite(loc, Suite::location, workdir, opts);
    bool all_done = suite.runs.size() == 5;
    std::string trend;
    for (const auto& r : suite.runs) {
      all_done = all_done && r.ok();
      trend += (trend.empty() ? "" : ", ") + r.report.at("label").get<std::string>() + " " + points(r.mean_dsc());
    }
    const bool ranked = suite.table_markdown.find("| Rank |") != std::string::npos &&
                        fs::exists(workdir / "runs/location/suite-location/comparison.md");
    record("insertion location: five configurations complete with a ranked table", all_done && ranked, trend);

    // Statistics of the DeepAll model with D0 held out, after the first stage.
    const auto ds = load_dataset(workdir / "data");
    export_feature_stats(workdir / "runs/deepall/seed0/d0.ckpt", ds, 1, workdir / "deepall_res1_stats.csv");
    feature_clusters(workdir / "deepall_res1_stats.csv");

    // Determinism: a fresh LODO run at one seed, twice, without reuse.
    auto det = base;
    det.seeds = {0};
    det.output = "runs/determinism";
    run_experiment(det, workdir);
    const auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const std::string first = read(workdir / "runs/determinism/report.json");
    run_experiment(det, workdir);
    const std::string second = read(workdir / "runs/determinism/report.json");
    record("determinism: two LODO runs give byte-identical reports", !first.empty() && first == second,
           std::to_string(first.size()) + " bytes, " + (first == second ? "identical" : "DIFFERENT"));
  } catch (const std::exception& e) {
    record("benchmark runs", false, e.what());
  }

  int failed = 0;
  for (const auto& o : outcomes) failed += !o.pass;
  std::printf("%d/%zu criteria passed in %.0f s\n", static_cast<int>(outcomes.size()) - failed, outcomes.size(),
              seconds_since(start));
  return failed == 0 ? 0 : 1;
}
