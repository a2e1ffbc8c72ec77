#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dgseg/channel_stats.hpp"

namespace dgseg {

/// One row of the statistics CSV: `domain,sample,channel,mean,std`.
struct StatRecord {
  std::string domain;
  int sample = 0;
  int channel = 0;
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const StatRecord&) const = default;
};

/// B*C records in (sample, channel) order. `sample_offset` is added to the
/// sample index so consecutive batches get distinct ids.
template <typename T>
std::vector<StatRecord> collect_stats(const Tensor<T>& f, const std::string& domain_label, int sample_offset = 0,
                                      double eps = kDefaultStatsEps);

/// Owns the CSV file; writes the header on open. Values use 9 significant digits.
class StatsCsvWriter {
 public:
  explicit StatsCsvWriter(const std::filesystem::path& path);
  void append(const std::vector<StatRecord>& records);
  std::size_t rows() const { return rows_; }
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t rows_ = 0;
};

inline constexpr const char* kStatsCsvHeader = "domain,sample,channel,mean,std";

/// Collects and appends in one step.
template <typename T>
std::vector<StatRecord> export_stats(const Tensor<T>& f, const std::string& domain_label, StatsCsvWriter& sink,
                                     int sample_offset = 0);

std::string format_stat_line(const StatRecord& r);
std::vector<StatRecord> read_stats_csv(const std::filesystem::path& path);

}  // namespace dgseg
