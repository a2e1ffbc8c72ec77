#include <cstdio>
#include <fstream>
#include <regex>
#include <stdexcept>

#include "dgseg/png_io.hpp"
#include "dgseg/synthdata.hpp"

namespace dgseg {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

nlohmann::ordered_json entry_json(const SampleEntry& e) {
  nlohmann::ordered_json j;
  j["domain"] = e.domain;
  j["index"] = e.index;
  j["image"] = e.image;
  j["mask"] = e.mask;
  j["image_fnv1a"] = e.image_hash;
  j["mask_fnv1a"] = e.mask_hash;
  return j;
}

SampleEntry entry_from(const nlohmann::json& j) {
  return {j.at("domain").get<int>(),        j.at("index").get<int>(),
          j.at("image").get<std::string>(), j.at("mask").get<std::string>(),
          j.at("image_fnv1a").get<std::string>(), j.at("mask_fnv1a").get<std::string>()};
}

const std::regex kOwnedFile(R"((manifest\.json|d\d+_s\d+_(img|mask)\.png))");

Sample load_sample(const fs::path& dir, const SampleEntry& e, const DatasetManifest& m) {
  const fs::path img_path = dir / e.image;
  const fs::path mask_path = dir / e.mask;
  for (const auto& p : {img_path, mask_path}) {
    if (!fs::exists(p)) throw std::runtime_error("dataset: missing file " + p.string());
  }
  const std::string img_bytes = read_file(img_path);
  const std::string mask_bytes = read_file(mask_path);
  if (hex64(fnv1a64(img_bytes)) != e.image_hash) throw std::runtime_error("dataset: checksum mismatch for " + img_path.string());
  if (hex64(fnv1a64(mask_bytes)) != e.mask_hash) throw std::runtime_error("dataset: checksum mismatch for " + mask_path.string());
  const GrayImage img = read_png_gray8(img_path);
  const GrayImage mask = read_png_gray8(mask_path);
  for (const auto* g : {&img, &mask}) {
    if (g->width != m.image_size || g->height != m.image_size) {
      throw std::runtime_error("dataset: shape mismatch for " + (g == &img ? img_path : mask_path).string());
    }
  }
  const std::uint8_t max_label = m.label_mode == LabelMode::two_class ? 2 : 1;
  for (std::uint8_t l : mask.pixels) {
    if (l > max_label) throw std::runtime_error("dataset: invalid label in " + mask_path.string());
  }
  Sample s;
  s.size = m.image_size;
  s.domain_id = e.domain;
  s.sample_id = "d" + std::to_string(e.domain) + "_s" + std::to_string(e.index);
  s.image.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) s.image[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  s.mask = mask.pixels;
  return s;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::ordered_json DatasetManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["K"] = num_domains;
  j["per_domain"] = per_domain;
  j["image_size"] = image_size;
  j["seed"] = seed;
  j["label_mode"] = to_string(label_mode);
  auto list = [](const std::vector<SampleEntry>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& e : v) a.push_back(entry_json(e));
    return a;
  };
  j["train"] = list(train);
  j["test"] = list(test);
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) throw std::runtime_error("manifest: unsupported format version " + std::to_string(m.format_version));
  m.num_domains = j.at("K").get<int>();
  m.per_domain = j.at("per_domain").get<std::vector<int>>();
  m.image_size = j.at("image_size").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.label_mode = parse_label_mode(j.at("label_mode").get<std::string>());
  for (const auto& e : j.at("train")) m.train.push_back(entry_from(e));
  for (const auto& e : j.at("test")) m.test.push_back(entry_from(e));
  if (static_cast<int>(m.per_domain.size()) != m.num_domains) throw std::runtime_error("manifest: per_domain length != K");
  std::vector<int> counts(static_cast<std::size_t>(m.num_domains), 0);
  for (const auto* list : {&m.train, &m.test}) {
    for (const auto& e : *list) {
      if (e.domain < 0 || e.domain >= m.num_domains) throw std::runtime_error("manifest: domain out of range in " + e.image);
      ++counts[e.domain];
    }
  }
  if (counts != m.per_domain) throw std::runtime_error("manifest: listed samples do not match per_domain counts");
  return m;
}

DatasetManifest generate_dataset(const GenerateOptions& opts, const fs::path& out) {
  if (opts.num_domains < 2) throw std::invalid_argument("generate_dataset: need at least two domains (K >= 2)");
  if (opts.per_domain < 2) throw std::invalid_argument("generate_dataset: need at least two samples per domain");
  if (opts.image_size < kMinImageSize || opts.image_size % 16 != 0) {
    throw std::invalid_argument("generate_dataset: image size must be a multiple of 16 and at least 64");
  }
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!opts.overwrite) throw std::runtime_error("output directory " + out.string() + " is not empty");
    for (const auto& ent : fs::directory_iterator(out)) {
      if (ent.is_regular_file() && std::regex_match(ent.path().filename().string(), kOwnedFile)) fs::remove(ent.path());
    }
  }
  fs::create_directories(out);

  DatasetManifest m;
  m.num_domains = opts.num_domains;
  m.per_domain.assign(static_cast<std::size_t>(opts.num_domains), opts.per_domain);
  m.image_size = opts.image_size;
  m.seed = opts.seed;
  m.label_mode = opts.label_mode;
  const RandomSource root(opts.seed);
  const int n_train = opts.per_domain * 4 / 5;
  for (int d = 0; d < opts.num_domains; ++d) {
    const DomainStyle style = make_domain_style(opts.seed, d);
    for (int i = 0; i < opts.per_domain; ++i) {
      const auto key = {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)};
      RandomSource geo = root.derive("geometry", key);
      RandomSource app = root.derive("appearance", key);
      const Sample s = generate_sample(style, opts.image_size, geo, app, opts.label_mode);
      GrayImage img{opts.image_size, opts.image_size, {}};
      img.pixels.resize(s.image.size());
      for (std::size_t k = 0; k < s.image.size(); ++k) {
        img.pixels[k] = static_cast<std::uint8_t>(std::lround(std::clamp(s.image[k], 0.0f, 1.0f) * 255.0f));
      }
      const GrayImage mask{opts.image_size, opts.image_size, s.mask};
      SampleEntry e;
      e.domain = d;
      e.index = i;
      const std::string stem = "d" + std::to_string(d) + "_s" + std::to_string(i);
      e.image = stem + "_img.png";
      e.mask = stem + "_mask.png";
      write_png_gray8(out / e.image, img);
      write_png_gray8(out / e.mask, mask);
      e.image_hash = hex64(fnv1a64(read_file(out / e.image)));
      e.mask_hash = hex64(fnv1a64(read_file(out / e.mask)));
      (i < n_train ? m.train : m.test).push_back(std::move(e));
    }
  }
  const fs::path tmp = out / "manifest.json.tmp";
  write_file(tmp, m.to_json().dump(2) + "\n");
  fs::rename(tmp, out / "manifest.json");
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw std::runtime_error("dataset: no manifest.json in " + dir.string());
  const std::string bytes = read_file(mpath);
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(nlohmann::json::parse(bytes));
  ds.manifest_hash = hex64(fnv1a64(bytes));
  for (const auto& e : ds.manifest.train) ds.train.push_back(load_sample(dir, e, ds.manifest));
  for (const auto& e : ds.manifest.test) ds.test.push_back(load_sample(dir, e, ds.manifest));
  return ds;
}

std::vector<const Sample*> Dataset::split(bool training, const std::vector<int>& domains) const {
  std::vector<const Sample*> out;
  for (const auto& s : training ? train : test) {
    if (std::find(domains.begin(), domains.end(), s.domain_id) != domains.end()) out.push_back(&s);
  }
  return out;
}

}  // namespace dgseg
