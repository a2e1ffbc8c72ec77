#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgseg/random_source.hpp"
#include "json.hpp"

namespace dgseg {

/// Appearance of one acquisition "site". Geometry never depends on it.
struct DomainStyle {
  int domain_id = 0;
  double gamma = 1.0;          // [0.4, 2.5]
  double brightness = 0.0;     // [-0.2, 0.2]
  double contrast = 1.0;       // [0.6, 1.4]
  double noise_std = 0.0;      // [0, 0.1]
  double bias_amplitude = 0.0; // [0, 0.3]
  double texture_scale = 0.5;  // [0, 1]: background texture amplitude and frequency

  void validate() const;
  bool operator==(const DomainStyle&) const = default;
};

/// Style parameters for `domain_id`, drawn from a stream keyed by (global_seed, domain_id).
/// Each parameter sits on a golden-ratio stratum of its range (different
/// offset per parameter) plus a small jitter, so any four consecutive ids are
/// spread over the range.
DomainStyle make_domain_style(std::uint64_t global_seed, int domain_id);

enum class LabelMode { two_class, single_class };
std::string to_string(LabelMode m);
LabelMode parse_label_mode(const std::string& s);

inline constexpr int kMinImageSize = 64;

/// Image in [0, 1] and mask with labels {0 background, 1 outer, 2 inner}
/// (single-class mode: {0, 1}).
struct Sample {
  int size = 0;
  std::vector<float> image;
  std::vector<std::uint8_t> mask;
  int domain_id = 0;
  std::string sample_id;
};

struct Geometry {
  double cx = 0, cy = 0, rx = 0, ry = 0, angle = 0;  // outer ellipse
  double icx = 0, icy = 0, irx = 0, iry = 0;         // inner ellipse, same orientation
};

/// Random nested ellipse pair; the inner ellipse is strictly inside the outer
/// one on the pixel grid. Throws std::runtime_error after 100 rejected draws.
Geometry sample_geometry(int size, RandomSource& rng);
std::vector<std::uint8_t> rasterize(const Geometry& g, int size, LabelMode mode);

/// Geometry from `geometry_rng`, appearance from `appearance_rng`.
Sample generate_sample(const DomainStyle& style, int size, RandomSource& geometry_rng, RandomSource& appearance_rng,
                       LabelMode mode = LabelMode::two_class);

/// 8-bit quantization used on disk: round(v * 255) / 255.
std::vector<float> quantize(const std::vector<float>& image);

struct SampleEntry {
  int domain = 0;
  int index = 0;
  std::string image;
  std::string mask;
  std::string image_hash;  // FNV-1a 64 of the file bytes, hex
  std::string mask_hash;
};

struct DatasetManifest {
  int format_version = 1;
  int num_domains = 0;
  std::vector<int> per_domain;
  int image_size = 0;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::two_class;
  std::vector<SampleEntry> train;
  std::vector<SampleEntry> test;

  nlohmann::ordered_json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

struct GenerateOptions {
  int num_domains = 4;
  int per_domain = 50;
  int image_size = 128;
  std::uint64_t seed = 0;
  LabelMode label_mode = LabelMode::two_class;
  bool overwrite = false;
};

/// Writes PNG pairs plus manifest.json (last) under `out`. Per domain the
/// first 80% of indices are training samples, the rest test.
DatasetManifest generate_dataset(const GenerateOptions& opts, const std::filesystem::path& out);

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::string manifest_hash;  // hex FNV-1a of manifest.json

  int num_classes() const { return manifest.label_mode == LabelMode::two_class ? 3 : 2; }
  std::vector<const Sample*> split(bool training, const std::vector<int>& domains) const;
};

Dataset load_dataset(const std::filesystem::path& dir);

std::string hex64(std::uint64_t v);

}  // namespace dgseg
