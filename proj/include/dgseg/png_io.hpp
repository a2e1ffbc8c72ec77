#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace dgseg {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// 8-bit grayscale PNG, fixed compression settings and no timestamp chunk,
/// so identical pixels give identical files.
void write_png_gray8(const std::filesystem::path& path, const GrayImage& img);
GrayImage read_png_gray8(const std::filesystem::path& path);

}  // namespace dgseg
