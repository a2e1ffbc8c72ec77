#include <algorithm>
#include <cstdio>
#include <map>
#include <tuple>

#include "dgseg/metrics.hpp"

namespace dgseg {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

MetricsReport aggregate(std::vector<MetricEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const MetricEntry& a, const MetricEntry& b) {
    return std::tie(a.domain, a.cls, a.fold) < std::tie(b.domain, b.cls, b.fold);
  });
  MetricsReport r;
  std::map<std::string, std::pair<double, int>> cls_dsc;
  std::map<std::string, std::pair<double, int>> cls_asd;
  double dsc_sum = 0.0, asd_sum = 0.0;
  int asd_n = 0;
  for (const auto& e : entries) {
    dsc_sum += e.dsc;
    auto& cd = cls_dsc[e.cls];
    cd.first += e.dsc;
    ++cd.second;
    auto& ca = cls_asd[e.cls];
    if (e.asd) {
      asd_sum += *e.asd;
      ++asd_n;
      ca.first += *e.asd;
      ++ca.second;
    }
    r.asd_failures += e.asd_failures;
  }
  if (!entries.empty()) r.average_dsc = dsc_sum / static_cast<double>(entries.size());
  if (asd_n > 0) r.average_asd = asd_sum / asd_n;
  for (const auto& [cls, v] : cls_dsc) r.class_dsc.emplace_back(cls, v.first / v.second);
  for (const auto& [cls, v] : cls_asd) {
    r.class_asd.emplace_back(cls, v.second > 0 ? std::optional<double>(v.first / v.second) : std::nullopt);
  }
  r.entries = std::move(entries);
  return r;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["metadata"] = metadata;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json row;
    row["fold"] = e.fold;
    row["domain"] = e.domain;
    row["class"] = e.cls;
    row["dsc"] = e.dsc;
    row["asd"] = opt_json(e.asd);
    row["images"] = e.images;
    row["asd_failures"] = e.asd_failures;
    rows.push_back(std::move(row));
  }
  j["entries"] = std::move(rows);
  nlohmann::ordered_json avg;
  avg["dsc"] = average_dsc;
  avg["asd"] = opt_json(average_asd);
  nlohmann::ordered_json per_class_dsc = nlohmann::ordered_json::object();
  for (const auto& [cls, v] : class_dsc) per_class_dsc[cls] = v;
  nlohmann::ordered_json per_class_asd = nlohmann::ordered_json::object();
  for (const auto& [cls, v] : class_asd) per_class_asd[cls] = opt_json(v);
  avg["class_dsc"] = std::move(per_class_dsc);
  avg["class_asd"] = std::move(per_class_asd);
  avg["asd_failures"] = asd_failures;
  j["average"] = std::move(avg);
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  std::vector<MetricEntry> entries;
  for (const auto& row : j.at("entries")) {
    MetricEntry e;
    e.fold = row.at("fold").get<std::string>();
    e.domain = row.at("domain").get<int>();
    e.cls = row.at("class").get<std::string>();
    e.dsc = row.at("dsc").get<double>();
    e.asd = opt_from(row.at("asd"));
    e.images = row.at("images").get<int>();
    e.asd_failures = row.at("asd_failures").get<int>();
    entries.push_back(std::move(e));
  }
  MetricsReport r = aggregate(std::move(entries));
  if (j.contains("metadata")) r.metadata = j.at("metadata");
  return r;
}

std::string MetricsReport::to_csv() const {
  std::string out = "fold,domain,class,dsc,asd,images,asd_failures\n";
  for (const auto& e : entries) {
    out += e.fold + "," + std::to_string(e.domain) + "," + e.cls + "," + fmt(e.dsc) + "," + (e.asd ? fmt(*e.asd) : "") +
           "," + std::to_string(e.images) + "," + std::to_string(e.asd_failures) + "\n";
  }
  for (std::size_t i = 0; i < class_dsc.size(); ++i) {
    const auto& asd_v = class_asd[i].second;
    out += "average,all," + class_dsc[i].first + "," + fmt(class_dsc[i].second) + "," + (asd_v ? fmt(*asd_v) : "") +
           ",,\n";
  }
  out += "average,all,pooled," + fmt(average_dsc) + "," + (average_asd ? fmt(*average_asd) : "") + ",," +
         std::to_string(asd_failures) + "\n";
  return out;
}

}  // namespace dgseg
