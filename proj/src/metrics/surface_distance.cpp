#include <cmath>
#include <limits>
#include <stdexcept>

#include "dgseg/metrics.hpp"

namespace dgseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact 1-D squared distance transform (lower envelope of parabolas) over the
// finite entries of f. Entries with no finite site anywhere stay infinite.
void edt_1d(const std::vector<double>& f, std::vector<double>& out) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v;
  std::vector<double> z;
  v.reserve(f.size());
  z.reserve(f.size() + 1);
  // z[k], z[k + 1] bound the interval where parabola v[k] is lowest.
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (v.empty()) {
      v.push_back(q);
      z = {-kInf, kInf};
      continue;
    }
    for (;;) {
      const int p = v.back();
      const double s =
          ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s <= z[v.size() - 1]) {  // z[0] = -inf, so the first parabola is never removed
        v.pop_back();
        z.pop_back();
        continue;
      }
      z.back() = s;
      v.push_back(q);
      z.push_back(kInf);
      break;
    }
  }
  out.assign(f.size(), kInf);
  if (v.empty()) return;
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = q - v[k];
    out[q] = d * d + f[v[k]];
  }
}

// Squared Euclidean distance from every pixel to the nearest site.
std::vector<double> squared_edt(const std::vector<std::pair<int, int>>& sites, int height, int width) {
  std::vector<double> grid(static_cast<std::size_t>(height) * width, kInf);
  for (auto [y, x] : sites) grid[static_cast<std::size_t>(y) * width + x] = 0.0;
  std::vector<double> line, res;
  for (int x = 0; x < width; ++x) {
    line.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) line[y] = grid[static_cast<std::size_t>(y) * width + x];
    edt_1d(line, res);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = res[y];
  }
  for (int y = 0; y < height; ++y) {
    line.assign(grid.begin() + static_cast<std::ptrdiff_t>(y) * width, grid.begin() + static_cast<std::ptrdiff_t>(y + 1) * width);
    edt_1d(line, res);
    std::copy(res.begin(), res.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * width);
  }
  return grid;
}

double mean_distance(const std::vector<std::pair<int, int>>& from, const std::vector<double>& sq, int width) {
  double sum = 0.0;
  for (auto [y, x] : from) sum += std::sqrt(sq[static_cast<std::size_t>(y) * width + x]);
  return sum / static_cast<double>(from.size());
}

}  // namespace

std::vector<std::pair<int, int>> boundary_points(const BinaryMask& m) {
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == m.height - 1 || x == m.width - 1;
      if (edge || !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1)) pts.emplace_back(y, x);
    }
  }
  return pts;
}

std::optional<double> asd(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.on.size() != gt.on.size()) {
    throw std::invalid_argument("asd: mask shapes differ");
  }
  const auto bp = boundary_points(pred);
  const auto bg = boundary_points(gt);
  if (bp.empty() || bg.empty()) return std::nullopt;
  const auto to_gt = squared_edt(bg, gt.height, gt.width);
  const auto to_pred = squared_edt(bp, pred.height, pred.width);
  return 0.5 * (mean_distance(bp, to_gt, gt.width) + mean_distance(bg, to_pred, pred.width));
}

}  // namespace dgseg
