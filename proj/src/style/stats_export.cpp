#include "dgseg/stats_export.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace dgseg {

namespace {

std::string g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_label(const std::string& label) {
  if (label.empty() || label.find_first_of(",\"\n\r") != std::string::npos) {
    throw std::invalid_argument("stats export: domain label '" + label + "' is empty or needs quoting");
  }
}

}  // namespace

template <typename T>
std::vector<StatRecord> collect_stats(const Tensor<T>& f, const std::string& domain_label, int sample_offset,
                                      double eps) {
  check_label(domain_label);
  const ChannelStats s = channel_mean_std(f, eps);
  std::vector<StatRecord> out;
  out.reserve(static_cast<std::size_t>(f.batch()) * f.channels());
  for (int b = 0; b < f.batch(); ++b) {
    for (int c = 0; c < f.channels(); ++c) {
      out.push_back({domain_label, sample_offset + b, c, s.mean(b, c), s.std(b, c)});
    }
  }
  return out;
}

template <typename T>
std::vector<StatRecord> export_stats(const Tensor<T>& f, const std::string& domain_label, StatsCsvWriter& sink,
                                     int sample_offset) {
  auto records = collect_stats(f, domain_label, sample_offset);
  sink.append(records);
  return records;
}

std::string format_stat_line(const StatRecord& r) {
  return r.domain + "," + std::to_string(r.sample) + "," + std::to_string(r.channel) + "," + g9(r.mean) + "," +
         g9(r.std);
}

StatsCsvWriter::StatsCsvWriter(const std::filesystem::path& path) : path_(path) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open statistics CSV " + path.string());
  out_ << kStatsCsvHeader << '\n';
}

void StatsCsvWriter::append(const std::vector<StatRecord>& records) {
  for (const auto& r : records) out_ << format_stat_line(r) << '\n';
  if (!out_) throw std::runtime_error("write failed on " + path_.string());
  rows_ += records.size();
}

void StatsCsvWriter::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("closing " + path_.string() + " failed");
}

std::vector<StatRecord> read_stats_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open statistics CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kStatsCsvHeader) {
    throw std::runtime_error(path.string() + ": missing or unexpected header");
  }
  std::vector<StatRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string domain, sample, channel, mean, sd;
    if (!std::getline(ss, domain, ',') || !std::getline(ss, sample, ',') || !std::getline(ss, channel, ',') ||
        !std::getline(ss, mean, ',') || !std::getline(ss, sd)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    out.push_back({domain, std::stoi(sample), std::stoi(channel), std::stod(mean), std::stod(sd)});
  }
  return out;
}

template std::vector<StatRecord> collect_stats<float>(const Tensor<float>&, const std::string&, int, double);
template std::vector<StatRecord> collect_stats<double>(const Tensor<double>&, const std::string&, int, double);
template std::vector<StatRecord> export_stats<float>(const Tensor<float>&, const std::string&, StatsCsvWriter&, int);
template std::vector<StatRecord> export_stats<double>(const Tensor<double>&, const std::string&, StatsCsvWriter&,
                                                      int);

}  // namespace dgseg
