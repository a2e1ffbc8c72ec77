#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dgseg/experiment.hpp"

namespace dgseg {

namespace {

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Colorblind-safe palette (Okabe-Ito), cycled.
constexpr const char* kPalette[] = {"#0072B2", "#E69F00", "#009E73", "#D55E00",
                                    "#CC79A7", "#56B4E9", "#F0E442", "#000000"};

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<std::string>& series,
                          const std::vector<std::vector<std::optional<double>>>& values) {
  if (values.size() != series.size()) throw std::invalid_argument("bar_chart_svg: one value row per series");
  for (const auto& row : values) {
    if (row.size() != groups.size()) throw std::invalid_argument("bar_chart_svg: one value per group");
  }
  const double bar_w = 14.0, group_gap = 18.0, left = 50.0, top = 40.0, plot_h = 240.0;
  const double group_w = std::max<double>(1, series.size()) * bar_w + group_gap;
  const double plot_w = group_w * std::max<double>(1, groups.size());
  const double legend_h = 18.0 * static_cast<double>(series.size());
  const double width = left + plot_w + 20.0;
  const double height = top + plot_h + 40.0 + legend_h + 10.0;

  double vmax = 100.0;
  for (const auto& row : values) {
    for (const auto& v : row) {
      if (v) vmax = std::max(vmax, *v);
    }
  }
  const auto y_of = [&](double v) { return top + plot_h - plot_h * std::clamp(v, 0.0, vmax) / vmax; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(width) + "\" height=\"" + f2(height) +
                  "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f2(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
       "</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = vmax * tick / 4.0;
    const double y = y_of(v);
    s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(y) + "\" x2=\"" + f2(left + plot_w) + "\" y2=\"" + f2(y) +
         "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + f2(left - 6) + "\" y=\"" + f2(y + 4) + "\" text-anchor=\"end\">" + f2(v) + "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + group_gap / 2 + group_w * static_cast<double>(g);
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double x = gx + bar_w * static_cast<double>(k);
      const auto& v = values[k][g];
      if (!v) {
        s += "<text x=\"" + f2(x + bar_w / 2) + "\" y=\"" + f2(top + plot_h - 4) +
             "\" text-anchor=\"middle\" fill=\"#888\">x</text>\n";
        continue;
      }
      const double y = y_of(*v);
      s += "<rect x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" width=\"" + f2(bar_w - 2) + "\" height=\"" +
           f2(top + plot_h - y) + "\" fill=\"" + kPalette[k % std::size(kPalette)] + "\"><title>" +
           escape(series[k]) + " " + escape(groups[g]) + ": " + f2(*v) + "</title></rect>\n";
    }
    s += "<text x=\"" + f2(gx + bar_w * static_cast<double>(series.size()) / 2) + "\" y=\"" + f2(top + plot_h + 16) +
         "\" text-anchor=\"middle\">" + escape(groups[g]) + "</text>\n";
  }
  s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top + plot_h) + "\" x2=\"" + f2(left + plot_w) + "\" y2=\"" +
       f2(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = top + plot_h + 34 + 18.0 * static_cast<double>(k);
    s += "<rect x=\"" + f2(left) + "\" y=\"" + f2(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
         kPalette[k % std::size(kPalette)] + "\"/>\n";
    s += "<text x=\"" + f2(left + 18) + "\" y=\"" + f2(y) + "\">" + escape(series[k]) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace dgseg
