#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "dgseg/checkpoint.hpp"
#include "dgseg/experiment.hpp"

namespace dgseg {

namespace fs = std::filesystem;

namespace {

struct Fold {
  std::string label;
  std::uint64_t key = 0;
  std::vector<int> train_domains;
  std::vector<int> test_domains;
};

std::vector<Fold> plan_folds(const ExperimentConfig& cfg, int K) {
  std::vector<Fold> folds;
  switch (cfg.protocol) {
    case Protocol::lodo:
    case Protocol::deepall:
      if (K < 2) throw ConfigError("leave-one-domain-out needs at least two domains, dataset has " + std::to_string(K));
      for (int d = 0; d < K; ++d) {
        Fold f{"d" + std::to_string(d), static_cast<std::uint64_t>(d), {}, {d}};
        for (int o = 0; o < K; ++o) {
          if (o != d) f.train_domains.push_back(o);
        }
        folds.push_back(std::move(f));
      }
      break;
    case Protocol::intra_domain:
      for (int d = 0; d < K; ++d) folds.push_back({"d" + std::to_string(d), static_cast<std::uint64_t>(d), {d}, {d}});
      break;
    case Protocol::single_source: {
      const int s = cfg.source_domain;
      if (s >= K) throw ConfigError("source_domain " + std::to_string(s) + " out of range for K=" + std::to_string(K));
      if (K < 2) throw ConfigError("single-source needs at least one target domain");
      Fold f{"src" + std::to_string(s), static_cast<std::uint64_t>(s), {s}, {}};
      for (int o = 0; o < K; ++o) {
        if (o != s) f.test_domains.push_back(o);
      }
      folds.push_back(std::move(f));
      break;
    }
  }
  return folds;
}

std::vector<int> expected_domains(const std::vector<Fold>& folds) {
  std::set<int> all;
  for (const auto& f : folds) all.insert(f.test_domains.begin(), f.test_domains.end());
  return {all.begin(), all.end()};
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

nlohmann::ordered_json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::ordered_json::parse(in);
}

nlohmann::ordered_json mean_std(const std::vector<double>& v) {
  nlohmann::ordered_json j;
  if (v.empty()) {
    j["mean"] = nullptr;
    j["std"] = nullptr;
    j["n"] = 0;
    return j;
  }
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  j["mean"] = m;
  j["std"] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  j["n"] = v.size();
  return j;
}

/// Seed-level summaries: each seed contributes one number per cell.
nlohmann::ordered_json summarize(const std::vector<MetricsReport>& per_seed, const std::vector<int>& domains) {
  std::vector<double> pooled, asd;
  std::map<std::string, std::vector<double>> by_class;
  std::map<std::pair<int, std::string>, std::vector<double>> cells;
  std::map<int, std::vector<double>> by_domain;
  for (const auto& r : per_seed) {
    if (r.entries.empty()) continue;
    pooled.push_back(r.average_dsc);
    if (r.average_asd) asd.push_back(*r.average_asd);
    for (const auto& [cls, v] : r.class_dsc) by_class[cls].push_back(v);
    std::map<int, std::pair<double, int>> dom;
    for (const auto& e : r.entries) {
      cells[{e.domain, e.cls}].push_back(e.dsc);
      dom[e.domain].first += e.dsc;
      ++dom[e.domain].second;
    }
    for (const auto& [d, v] : dom) by_domain[d].push_back(v.first / v.second);
  }
  nlohmann::ordered_json j;
  j["dsc"] = mean_std(pooled);
  j["asd"] = mean_std(asd);
  nlohmann::ordered_json cls = nlohmann::ordered_json::object();
  for (const auto& [c, v] : by_class) cls[c] = mean_std(v);
  j["class_dsc"] = std::move(cls);
  nlohmann::ordered_json dom = nlohmann::ordered_json::array();
  for (int d : domains) {
    nlohmann::ordered_json row = mean_std(by_domain.count(d) ? by_domain[d] : std::vector<double>{});
    row["domain"] = d;
    dom.push_back(std::move(row));
  }
  j["domain_dsc"] = std::move(dom);
  nlohmann::ordered_json cell_rows = nlohmann::ordered_json::array();
  for (const auto& [key, v] : cells) {
    nlohmann::ordered_json row;
    row["domain"] = key.first;
    row["class"] = key.second;
    const auto ms = mean_std(v);
    row["mean"] = ms["mean"];
    row["std"] = ms["std"];
    row["n"] = ms["n"];
    cell_rows.push_back(std::move(row));
  }
  j["cells"] = std::move(cell_rows);
  return j;
}

std::string class_definition(LabelMode mode) {
  return mode == LabelMode::two_class ? "outer = labels {1,2} (disc region including cup); inner = label {2}"
                                      : "fg = label {1}";
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

RunResult from_report(const nlohmann::ordered_json& j, const fs::path& dir) {
  RunResult r;
  r.report = j;
  r.output_dir = dir;
  for (const auto& s : j.at("seeds")) r.per_seed.push_back(MetricsReport::from_json(s.at("metrics")));
  for (const auto& f : j.at("failures")) r.failures.push_back(f.get<std::string>());
  return r;
}

}  // namespace

double RunResult::mean_dsc() const {
  if (per_seed.empty()) return 0.0;
  double s = 0.0;
  int n = 0;
  for (const auto& r : per_seed) {
    if (r.entries.empty()) continue;
    s += r.average_dsc;
    ++n;
  }
  return n > 0 ? s / n : 0.0;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& workdir, const RunOptions& opts) {
  cfg.validate();
  const auto say = [&](const std::string& m) {
    if (opts.log) opts.log(m);
  };
  const Dataset ds = load_dataset(workdir / cfg.dataset);
  const int K = ds.manifest.num_domains;
  const auto folds = plan_folds(cfg, K);
  const fs::path out = workdir / cfg.output;
  const std::string chash = config_hash(cfg);

  if (opts.reuse && fs::exists(out / "report.json")) {
    const auto prior = read_json(out / "report.json");
    if (prior.value("config_hash", "") == chash && prior.value("dataset_hash", "") == ds.manifest_hash) {
      say("reusing " + (out / "report.json").string());
      RunResult r = from_report(prior, out);
      if (fs::exists(out / "timing.json")) r.seconds = read_json(out / "timing.json").value("seconds", 0.0);
      return r;
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  result.output_dir = out;
  nlohmann::ordered_json seeds_json = nlohmann::ordered_json::array();
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<MetricEntry> entries;
    const fs::path seed_dir = out / ("seed" + std::to_string(seed));
    for (const auto& fold : folds) {
      const std::string where = "seed " + std::to_string(seed) + " fold " + fold.label;
      try {
        const auto train = ds.split(true, fold.train_domains);
        const auto test = ds.split(false, fold.test_domains);
        say(cfg.label() + ": " + where + " training on " + std::to_string(train.size()) + " samples");
        TrainLog log;
        Network<float> net = train_model(train, cfg, ds.num_classes(), FoldStreams::make(seed, fold.key), &log);
        auto fold_entries = evaluate(net, test, ds.manifest.label_mode, fold.label, cfg.eval_batch);

        nlohmann::ordered_json meta;
        meta["config_hash"] = chash;
        meta["dataset_hash"] = ds.manifest_hash;
        meta["seed"] = seed;
        meta["fold"] = fold.label;
        fs::create_directories(seed_dir);
        save_checkpoint(net, seed_dir / (fold.label + ".ckpt"), meta);

        nlohmann::ordered_json fj = meta;
        fj["train_domains"] = fold.train_domains;
        fj["test_domains"] = fold.test_domains;
        fj["epoch_loss"] = log.epoch_loss;
        MetricsReport fr = aggregate(fold_entries);
        fj["metrics"] = fr.to_json();
        write_text(seed_dir / (fold.label + ".json"), fj.dump(2) + "\n");
        entries.insert(entries.end(), fold_entries.begin(), fold_entries.end());
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        result.failures.push_back(where + ": " + e.what());
        say("FAILED " + where + ": " + e.what());
      }
    }
    MetricsReport rep = aggregate(std::move(entries));
    rep.metadata["seed"] = seed;
    rep.metadata["config_hash"] = chash;
    rep.metadata["class_definition"] = class_definition(ds.manifest.label_mode);
    nlohmann::ordered_json sj;
    sj["seed"] = seed;
    sj["metrics"] = rep.to_json();
    seeds_json.push_back(std::move(sj));
    result.per_seed.push_back(std::move(rep));
  }

  nlohmann::ordered_json j;
  j["label"] = cfg.label();
  j["config_hash"] = chash;
  j["dataset_hash"] = ds.manifest_hash;
  j["config"] = cfg.to_json();
  j["protocol"] = to_string(cfg.protocol);
  j["class_definition"] = class_definition(ds.manifest.label_mode);
  j["expected_domains"] = expected_domains(folds);
  j["folds"] = [&] {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& f : folds) a.push_back(f.label);
    return a;
  }();
  j["summary"] = summarize(result.per_seed, expected_domains(folds));
  j["seeds"] = std::move(seeds_json);
  j["failures"] = result.failures;
  write_text(out / "report.json", j.dump(2) + "\n");
  result.report = std::move(j);
  // Kept out of report.json so reports stay byte-identical across runs.
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::ordered_json timing;
  timing["seconds"] = result.seconds;
  write_text(out / "timing.json", timing.dump(2) + "\n");
  return result;
}

RunResult run_lodo(ExperimentConfig cfg, const fs::path& workdir, const RunOptions& opts) {
  if (cfg.protocol != Protocol::deepall) cfg.protocol = Protocol::lodo;
  return run_experiment(cfg, workdir, opts);
}

RunResult run_intra_domain(ExperimentConfig cfg, const fs::path& workdir, const RunOptions& opts) {
  cfg.protocol = Protocol::intra_domain;
  return run_experiment(cfg, workdir, opts);
}

Suite parse_suite(const std::string& s) {
  if (s == "sr-vs-sm") return Suite::sr_vs_sm;
  if (s == "location") return Suite::location;
  if (s == "distribution") return Suite::distribution;
  if (s == "sm-extendibility") return Suite::sm_extendibility;
  throw ConfigError("unknown suite '" + s + "' (expected sr-vs-sm, location, distribution, sm-extendibility)");
}

std::string to_string(Suite s) {
  switch (s) {
    case Suite::sr_vs_sm: return "sr-vs-sm";
    case Suite::location: return "location";
    case Suite::distribution: return "distribution";
    case Suite::sm_extendibility: return "sm-extendibility";
  }
  return "unknown";
}

std::vector<ExperimentConfig> suite_variants(const ExperimentConfig& base, Suite suite) {
  std::vector<ExperimentConfig> out;
  const auto variant = [&](const std::string& name, auto&& edit) {
    ExperimentConfig c = base;
    c.protocol = Protocol::lodo;
    c.name = name;
    edit(c);
    c.output = (fs::path(base.output) / sanitize(name)).string();
    out.push_back(std::move(c));
  };
  switch (suite) {
    case Suite::sr_vs_sm:
      variant("deepall", [](ExperimentConfig& c) {
        c.protocol = Protocol::deepall;
        c.perturb.op = Operator::none;
      });
      for (Operator op : {Operator::sr_only, Operator::sr_mixup, Operator::trid}) {
        variant(to_string(op), [op](ExperimentConfig& c) { c.perturb.op = op; });
      }
      break;
    case Suite::location:
      for (const char* tag : {"res1", "res2", "res12", "res123", "res1234"}) {
        variant(std::string("trid@") + tag, [tag](ExperimentConfig& c) {
          c.perturb.op = Operator::trid;
          c.network.insertion_points = InsertionSet::parse(tag);
        });
      }
      break;
    case Suite::distribution:
      variant("uniform", [](ExperimentConfig& c) { c.perturb.op = Operator::trid; });
      variant("normal(0.5,1)", [](ExperimentConfig& c) { c.perturb.op = Operator::trid_normal; });
      break;
    case Suite::sm_extendibility:
      for (Operator op : {Operator::mixstyle, Operator::mixstyle_sm, Operator::efdm, Operator::efdm_sm}) {
        variant(to_string(op), [op](ExperimentConfig& c) { c.perturb.op = op; });
      }
      break;
  }
  return out;
}

bool SuiteResult::ok() const {
  for (const auto& r : runs) {
    if (!r.ok()) return false;
  }
  return true;
}

SuiteResult run_ablation_suite(const ExperimentConfig& base, Suite suite, const fs::path& workdir,
                               const RunOptions& opts) {
  SuiteResult result;
  std::vector<fs::path> dirs;
  for (const auto& cfg : suite_variants(base, suite)) {
    result.runs.push_back(run_experiment(cfg, workdir, opts));
    dirs.push_back(result.runs.back().output_dir);
  }
  const auto tables = write_report(dirs, workdir / base.output / ("suite-" + to_string(suite)));
  result.table_markdown = tables.markdown;
  return result;
}

}  // namespace dgseg
