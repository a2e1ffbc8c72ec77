#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dgseg/synthdata.hpp"

namespace dgseg {

namespace {

bool inside(double px, double py, double cx, double cy, double rx, double ry, double angle) {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

bool in_outer(const Geometry& g, int x, int y) { return inside(x + 0.5, y + 0.5, g.cx, g.cy, g.rx, g.ry, g.angle); }
bool in_inner(const Geometry& g, int x, int y) {
  return inside(x + 0.5, y + 0.5, g.icx, g.icy, g.irx, g.iry, g.angle);
}

bool strictly_nested(const Geometry& g, int size) {
  bool any_inner = false;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!in_inner(g, x, y)) continue;
      any_inner = true;
      if (!in_outer(g, x, y) || !in_outer(g, x - 1, y) || !in_outer(g, x + 1, y) || !in_outer(g, x, y - 1) ||
          !in_outer(g, x, y + 1)) {
        return false;
      }
    }
  }
  return any_inner;
}

void blur121(std::vector<double>& img, int size) {
  std::vector<double> tmp(img.size());
  auto at = [&](const std::vector<double>& v, int x, int y) {
    x = std::clamp(x, 0, size - 1);
    y = std::clamp(y, 0, size - 1);
    return v[static_cast<std::size_t>(y) * size + x];
  };
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      tmp[static_cast<std::size_t>(y) * size + x] = 0.25 * at(img, x - 1, y) + 0.5 * at(img, x, y) + 0.25 * at(img, x + 1, y);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      img[static_cast<std::size_t>(y) * size + x] = 0.25 * at(tmp, x, y - 1) + 0.5 * at(tmp, x, y) + 0.25 * at(tmp, x, y + 1);
}

}  // namespace

Geometry sample_geometry(int size, RandomSource& rng) {
  if (size < kMinImageSize) {
    throw std::invalid_argument("image size " + std::to_string(size) + " below minimum " +
                                std::to_string(kMinImageSize));
  }
  for (int attempt = 0; attempt < 100; ++attempt) {
    Geometry g;
    g.rx = rng.uniform(0.15, 0.30) * size;
    g.ry = rng.uniform(0.15, 0.30) * size;
    g.angle = rng.uniform(0.0, std::numbers::pi);
    const double r = std::max(g.rx, g.ry);
    g.cx = rng.uniform(r + 2.0, size - r - 2.0);
    g.cy = rng.uniform(r + 2.0, size - r - 2.0);
    const double scale = rng.uniform(0.3, 0.6);
    g.irx = scale * g.rx;
    g.iry = scale * g.ry;
    const double offset = rng.uniform(0.0, 0.4);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ou = offset * g.rx * std::cos(phi);
    const double ov = offset * g.ry * std::sin(phi);
    g.icx = g.cx + std::cos(g.angle) * ou - std::sin(g.angle) * ov;
    g.icy = g.cy + std::sin(g.angle) * ou + std::cos(g.angle) * ov;
    if (strictly_nested(g, size)) return g;
  }
  throw std::runtime_error("could not draw a nested ellipse pair in 100 attempts");
}

std::vector<std::uint8_t> rasterize(const Geometry& g, int size, LabelMode mode) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
  const std::uint8_t inner_label = mode == LabelMode::two_class ? 2 : 1;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      auto& m = mask[static_cast<std::size_t>(y) * size + x];
      if (in_inner(g, x, y)) {
        m = inner_label;
      } else if (in_outer(g, x, y)) {
        m = 1;
      }
    }
  }
  return mask;
}

Sample generate_sample(const DomainStyle& style, int size, RandomSource& geometry_rng, RandomSource& appearance_rng,
                       LabelMode mode) {
  style.validate();
  const Geometry geo = sample_geometry(size, geometry_rng);
  Sample s;
  s.size = size;
  s.domain_id = style.domain_id;
  s.mask = rasterize(geo, size, mode);
  const std::vector<std::uint8_t> regions = rasterize(geo, size, LabelMode::two_class);

  RandomSource& rng = appearance_rng;
  const double base[3] = {0.25 + rng.uniform(-0.03, 0.03), 0.5 + rng.uniform(-0.03, 0.03),
                          0.75 + rng.uniform(-0.03, 0.03)};
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> img(n);
  for (std::size_t i = 0; i < n; ++i) img[i] = base[regions[i]];
  blur121(img, size);

  // Background texture: three plane waves, wavelength shrinking with texture_scale.
  const double amplitude = 0.1 * style.texture_scale / 3.0;
  const double wavelength = size * (0.6 - 0.4 * style.texture_scale);
  for (int k = 0; k < 3; ++k) {
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double kx = 2.0 * std::numbers::pi / wavelength * std::cos(dir);
    const double ky = 2.0 * std::numbers::pi / wavelength * std::sin(dir);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        if (regions[i] == 0) img[i] += amplitude * std::sin(kx * x + ky * y + phase);
      }
  }

  // Bias field: random quadratic polynomial normalized to max |P| = 1.
  double coef[5];
  for (double& c : coef) c = rng.uniform(-1.0, 1.0);
  std::vector<double> bias(n);
  double peak = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = 2.0 * (x + 0.5) / size - 1.0;
      const double v = 2.0 * (y + 0.5) / size - 1.0;
      const double p = coef[0] * u + coef[1] * v + coef[2] * u * v + coef[3] * (u * u - 1.0 / 3.0) +
                       coef[4] * (v * v - 1.0 / 3.0);
      bias[static_cast<std::size_t>(y) * size + x] = p;
      peak = std::max(peak, std::abs(p));
    }
  if (peak > 0.0)
    for (double& p : bias) p /= peak;

  s.image.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = (img[i] - 0.5) * style.contrast + 0.5 + style.brightness;
    v = std::pow(std::clamp(v, 0.0, 1.0), style.gamma);
    v *= 1.0 + style.bias_amplitude * bias[i];
    v += style.noise_std * rng.normal();
    s.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return s;
}

std::vector<float> quantize(const std::vector<float>& image) {
  std::vector<float> q(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    q[i] = static_cast<float>(std::lround(std::clamp(image[i], 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
  return q;
}

}  // namespace dgseg
