#include <fstream>
#include <sstream>

#include "dgseg/checkpoint.hpp"
#include "dgseg/experiment.hpp"

namespace dgseg {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::lodo: return "lodo";
    case Protocol::intra_domain: return "intra-domain";
    case Protocol::deepall: return "deepall";
    case Protocol::single_source: return "single-source";
  }
  return "unknown";
}

Protocol parse_protocol(const std::string& s) {
  if (s == "lodo") return Protocol::lodo;
  if (s == "intra-domain" || s == "intra") return Protocol::intra_domain;
  if (s == "deepall") return Protocol::deepall;
  if (s == "single-source") return Protocol::single_source;
  throw ConfigError("unknown protocol '" + s + "'");
}

PerturbConfig ExperimentConfig::effective_perturb() const {
  PerturbConfig p = perturb;
  if (protocol == Protocol::deepall) p.op = Operator::none;
  return p;
}

std::string ExperimentConfig::label() const {
  if (!name.empty()) return name;
  if (protocol == Protocol::deepall) return "deepall";
  return to_string(perturb.op);
}

void ExperimentConfig::validate() const {
  try {
    perturb.validate();
    network.validate();
    schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("config: at least one seed required");
  if (dataset.empty()) throw ConfigError("config: dataset path required");
  if (output.empty()) throw ConfigError("config: output path required");
  if (eval_batch < 1) throw ConfigError("config: eval_batch must be positive");
  if (source_domain < 0) throw ConfigError("config: source_domain must be non-negative");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["dataset"] = dataset;
  j["protocol"] = to_string(protocol);
  nlohmann::ordered_json p;
  p["operator"] = to_string(perturb.op);
  p["p"] = perturb.p;
  p["alpha"] = perturb.alpha;
  p["normal_mean"] = perturb.normal_mean;
  p["normal_std"] = perturb.normal_std;
  p["eps"] = perturb.eps;
  j["perturb"] = p;
  j["network"] = network_config_to_json(network);
  nlohmann::ordered_json s;
  s["l0"] = schedule.l0;
  s["epochs"] = schedule.epochs;
  s["momentum"] = schedule.momentum;
  s["batch_size"] = schedule.batch_size;
  j["schedule"] = s;
  j["seeds"] = seeds;
  j["output"] = output;
  j["source_domain"] = source_domain;
  j["eval_batch"] = eval_batch;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known{"name",    "dataset", "protocol",      "perturb",   "network",
                                              "schedule", "seeds",  "output",        "source_domain", "eval_batch"};
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
    }
    c.name = j.value("name", c.name);
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("protocol")) c.protocol = parse_protocol(j.at("protocol").get<std::string>());
    if (j.contains("perturb")) {
      const auto& p = j.at("perturb");
      if (p.contains("operator")) c.perturb.op = parse_operator(p.at("operator").get<std::string>());
      c.perturb.p = p.value("p", c.perturb.p);
      c.perturb.alpha = p.value("alpha", c.perturb.alpha);
      c.perturb.normal_mean = p.value("normal_mean", c.perturb.normal_mean);
      c.perturb.normal_std = p.value("normal_std", c.perturb.normal_std);
      c.perturb.eps = p.value("eps", c.perturb.eps);
    }
    if (j.contains("network")) c.network = network_config_from_json(j.at("network"));
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.schedule.l0 = s.value("l0", c.schedule.l0);
      c.schedule.epochs = s.value("epochs", c.schedule.epochs);
      c.schedule.momentum = s.value("momentum", c.schedule.momentum);
      c.schedule.batch_size = s.value("batch_size", c.schedule.batch_size);
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.output = j.value("output", c.output);
    c.source_domain = j.value("source_domain", c.source_domain);
    c.eval_batch = j.value("eval_batch", c.eval_batch);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &config;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + key + "': '" + parts[i] + "' is not an object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ConfigError("override '" + key + "' does not address an object field");
  (*node)[parts.back()] = value;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return ExperimentConfig::from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Labels and output locations do not change what is computed.
  auto j = cfg.to_json();
  j.erase("name");
  j.erase("output");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace dgseg
