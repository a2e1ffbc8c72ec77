#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace dgseg {

/// Row-major binary mask.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> on;  // 0 or 1

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), on(static_cast<std::size_t>(h) * w, 0) {}
  bool at(int y, int x) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;
};

/// Pixels whose label is one of `labels`.
BinaryMask select_labels(std::span<const std::uint8_t> labels, int height, int width,
                         std::initializer_list<std::uint8_t> members);

/// 2|P n G| / (|P| + |G|); 1 when both are empty.
double dsc(const BinaryMask& pred, const BinaryMask& gt);

/// Foreground pixels with a 4-neighbour in the background or on the image edge.
std::vector<std::pair<int, int>> boundary_points(const BinaryMask& m);

/// Symmetric average surface distance in pixels: the mean of
/// (mean over pred boundary of distance to the gt boundary) and the converse.
/// Empty std::optional when either mask is empty.
std::optional<double> asd(const BinaryMask& pred, const BinaryMask& gt);

/// One evaluation cell: a (fold, domain, class) triple averaged over images.
struct MetricEntry {
  std::string fold;
  int domain = 0;
  std::string cls;
  double dsc = 0.0;
  std::optional<double> asd;  // mean over images where defined
  int images = 0;
  int asd_failures = 0;       // images where ASD was undefined
};

struct MetricsReport {
  std::vector<MetricEntry> entries;  // sorted by (domain, class, fold)
  double average_dsc = 0.0;          // pooled over all (domain, class) entries
  std::optional<double> average_asd;
  std::vector<std::pair<std::string, double>> class_dsc;  // per-class means
  std::vector<std::pair<std::string, std::optional<double>>> class_asd;
  int asd_failures = 0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  /// Flat table: one row per entry, then per-class and pooled averages.
  std::string to_csv() const;
};

/// Averages are recomputed from the entries; result is independent of entry order.
MetricsReport aggregate(std::vector<MetricEntry> entries);

}  // namespace dgseg
