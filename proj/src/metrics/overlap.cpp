#include <algorithm>
#include <stdexcept>

#include "dgseg/metrics.hpp"

namespace dgseg {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(on.begin(), on.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask select_labels(std::span<const std::uint8_t> labels, int height, int width,
                         std::initializer_list<std::uint8_t> members) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("select_labels: label count does not match shape");
  }
  BinaryMask m(height, width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.on[i] = std::find(members.begin(), members.end(), labels[i]) != members.end() ? 1 : 0;
  }
  return m;
}

double dsc(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width || pred.on.size() != gt.on.size()) {
    throw std::invalid_argument("dsc: mask shapes differ");
  }
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.on.size(); ++i) {
    const bool a = pred.on[i] != 0, b = gt.on[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

}  // namespace dgseg
