#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "dgseg/experiment.hpp"

namespace dgseg {

namespace fs = std::filesystem;

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string cell_text(const nlohmann::json& ms) {
  if (ms.is_null() || ms.at("mean").is_null()) return "n/a";
  std::string s = pct(ms.at("mean").get<double>());
  if (ms.at("n").get<int>() > 1) s += " ± " + pct(ms.at("std").get<double>());
  return s;
}

int class_rank(const std::string& c) {
  if (c == "outer") return 0;
  if (c == "inner") return 1;
  if (c == "fg") return 2;
  return 3;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

ComparisonTables compare_runs(const std::vector<nlohmann::json>& reports) {
  ComparisonTables t;
  if (reports.empty()) return t;
  const std::string hash = reports.front().at("dataset_hash").get<std::string>();
  for (const auto& r : reports) {
    if (r.at("dataset_hash").get<std::string>() != hash) {
      throw std::runtime_error("refusing to pool runs on different datasets (" + hash + " vs " +
                               r.at("dataset_hash").get<std::string>() + ")");
    }
  }

  std::set<int> domain_set;
  std::set<std::string> class_set;
  for (const auto& r : reports) {
    for (int d : r.at("expected_domains")) domain_set.insert(d);
    for (const auto& c : r.at("summary").at("cells")) class_set.insert(c.at("class").get<std::string>());
  }
  const std::vector<int> domains(domain_set.begin(), domain_set.end());
  std::vector<std::string> classes(class_set.begin(), class_set.end());
  std::stable_sort(classes.begin(), classes.end(),
                   [](const std::string& a, const std::string& b) { return class_rank(a) < class_rank(b); });

  // Rank by pooled mean DSC, best first; runs without results rank last.
  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto pooled = [&](std::size_t i) {
    const auto& m = reports[i].at("summary").at("dsc").at("mean");
    return m.is_null() ? -1.0 : m.get<double>();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled(a) > pooled(b); });
  std::vector<int> rank(reports.size());
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<int>(k) + 1;

  std::string header = "| Method |";
  std::string rule = "|---|";
  for (int d : domains) {
    for (const auto& c : classes) {
      header += " D" + std::to_string(d) + " " + c + " |";
      rule += "---|";
    }
  }
  for (const auto& c : classes) {
    header += " Avg " + c + " |";
    rule += "---|";
  }
  header += " Avg | Rank |\n";
  rule += "---|---|\n";
  t.markdown = header + rule;
  t.csv = "method,domain,class,dsc_mean,dsc_std,seeds,flag\n";

  std::vector<std::string> groups;
  for (int d : domains) groups.push_back("D" + std::to_string(d));
  groups.push_back("Avg");
  std::vector<std::string> series;
  std::vector<std::vector<std::optional<double>>> bars;

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto& summary = r.at("summary");
    const std::string label = r.at("label").get<std::string>();
    const std::size_t seeds = r.at("seeds").size();
    std::map<std::pair<int, std::string>, nlohmann::json> cells;
    for (const auto& c : summary.at("cells")) cells[{c.at("domain").get<int>(), c.at("class").get<std::string>()}] = c;

    bool incomplete = !r.at("failures").empty();
    std::string row = "| " + label + " |";
    for (int d : domains) {
      for (const auto& c : classes) {
        const auto it = cells.find({d, c});
        std::string flag;
        if (it == cells.end()) {
          flag = "missing";
          row += " n/a |";
        } else {
          if (it->second.at("n").get<std::size_t>() < seeds) flag = "partial";
          row += " " + cell_text(it->second) + (flag.empty() ? "" : "*") + " |";
        }
        if (!flag.empty()) incomplete = true;
        t.csv += label + "," + std::to_string(d) + "," + c + ",";
        if (it != cells.end()) {
          t.csv += num(it->second.at("mean").get<double>()) + "," + num(it->second.at("std").get<double>()) + "," +
                   std::to_string(it->second.at("n").get<int>());
        } else {
          t.csv += ",,0";
        }
        t.csv += "," + flag + "\n";
      }
    }
    const auto& class_dsc = summary.at("class_dsc");
    for (const auto& c : classes) {
      const nlohmann::json ms = class_dsc.contains(c) ? class_dsc.at(c) : nlohmann::json();
      row += " " + cell_text(ms) + " |";
      if (!ms.is_null() && !ms.at("mean").is_null()) {
        t.csv += label + ",avg," + c + "," + num(ms.at("mean").get<double>()) + "," + num(ms.at("std").get<double>()) +
                 "," + std::to_string(ms.at("n").get<int>()) + ",\n";
      }
    }
    const auto& dsc = summary.at("dsc");
    row += " " + cell_text(dsc) + " | " + std::to_string(rank[i]) + " |";
    if (!dsc.at("mean").is_null()) {
      t.csv += label + ",avg,pooled," + num(dsc.at("mean").get<double>()) + "," + num(dsc.at("std").get<double>()) + "," +
               std::to_string(dsc.at("n").get<int>()) + ",\n";
    }
    if (incomplete) {
      const std::size_t k = t.footnotes.size() + 1;
      row += " [" + std::to_string(k) + "]";
      std::string note = "[" + std::to_string(k) + "] " + label + ": incomplete run";
      for (const auto& f : r.at("failures")) note += "; " + f.get<std::string>();
      t.footnotes.push_back(note);
    }
    t.markdown += row + "\n";

    series.push_back(label);
    std::vector<std::optional<double>> vals;
    std::map<int, nlohmann::json> by_domain;
    for (const auto& dd : summary.at("domain_dsc")) by_domain[dd.at("domain").get<int>()] = dd;
    for (int d : domains) {
      const auto it = by_domain.find(d);
      if (it == by_domain.end() || it->second.at("mean").is_null()) {
        vals.push_back(std::nullopt);
      } else {
        vals.push_back(100.0 * it->second.at("mean").get<double>());
      }
    }
    vals.push_back(dsc.at("mean").is_null() ? std::nullopt : std::optional<double>(100.0 * dsc.at("mean").get<double>()));
    bars.push_back(std::move(vals));
  }

  t.markdown += "\nDSC in percent, mean ± std over seeds. Cells marked * average fewer seeds than the run requested.\n";
  const std::string class_def = reports.front().value("class_definition", "");
  if (!class_def.empty()) t.markdown += "Classes: " + class_def + ".\n";
  if (!t.footnotes.empty()) {
    t.markdown += "\n";
    for (const auto& f : t.footnotes) t.markdown += f + "\n";
  }
  t.svg = bar_chart_svg("Dice by target domain", groups, series, bars);
  return t;
}

ComparisonTables write_report(const std::vector<fs::path>& run_dirs, const fs::path& out) {
  std::vector<nlohmann::json> reports;
  std::vector<std::string> skipped;
  for (const auto& dir : run_dirs) {
    const fs::path p = dir / "report.json";
    std::ifstream in(p);
    if (!in) {
      skipped.push_back(dir.string() + " has no report.json (run incomplete), skipped");
      continue;
    }
    reports.push_back(nlohmann::json::parse(in));
  }
  ComparisonTables t = compare_runs(reports);
  if (!skipped.empty()) {
    t.markdown += "\n";
    for (const auto& s : skipped) {
      t.footnotes.push_back(s);
      t.markdown += "Skipped: " + s + "\n";
    }
  }
  fs::create_directories(out);
  write_text(out / "comparison.md", t.markdown);
  write_text(out / "comparison.csv", t.csv);
  write_text(out / "dsc_by_domain.svg", t.svg);
  return t;
}

}  // namespace dgseg
