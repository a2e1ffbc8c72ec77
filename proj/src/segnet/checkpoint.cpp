#include "dgseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dgseg {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error(origin_ + ": truncated checkpoint");
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::ordered_json network_config_to_json(const NetworkConfig& cfg) {
  nlohmann::ordered_json j;
  j["in_channels"] = cfg.in_channels;
  j["num_classes"] = cfg.num_classes;
  j["stage_widths"] = cfg.stage_widths;
  j["blocks_per_stage"] = cfg.blocks_per_stage;
  j["insertion_points"] = cfg.insertion_points.names();
  return j;
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig cfg;
  cfg.in_channels = j.value("in_channels", cfg.in_channels);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  if (j.contains("stage_widths")) cfg.stage_widths = j.at("stage_widths").get<std::vector<int>>();
  cfg.blocks_per_stage = j.value("blocks_per_stage", cfg.blocks_per_stage);
  if (j.contains("insertion_points")) {
    const auto& ip = j.at("insertion_points");
    if (ip.is_string()) {
      cfg.insertion_points = InsertionSet::parse(ip.get<std::string>());
    } else {
      std::string tag = "res";
      for (const auto& name : ip) {
        const auto s = name.get<std::string>();
        if (s.size() != 4 || s.rfind("res", 0) != 0) throw std::invalid_argument("insertion point '" + s + "'");
        tag += s[3];
      }
      cfg.insertion_points = ip.empty() ? InsertionSet::none() : InsertionSet::parse(tag);
    }
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(Network<float>& net, const std::filesystem::path& path, const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json header;
  header["network"] = network_config_to_json(net.config());
  header["meta"] = meta;
  const std::string hdr = header.dump();

  std::string out;
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  const auto state = net.state();
  put_u32(out, static_cast<std::uint32_t>(state.size()));
  for (const auto* p : state) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put_u32(out, static_cast<std::uint32_t>(p->dims.size()));
    for (int d : p->dims) put_u32(out, static_cast<std::uint32_t>(d));
    put_u64(out, p->value.size());
    for (float v : p->value) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed for checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());
  const auto version = r.uint(1);
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header = nlohmann::json::parse(r.str(r.uint(4)));
  NetworkConfig cfg = network_config_from_json(header.at("network"));
  LoadedCheckpoint ck{Network<float>(cfg, RandomSource(0)), header.value("meta", nlohmann::json::object())};

  std::map<std::string, Param<float>*> by_name;
  for (auto* p : ck.network.state()) by_name[p->name] = p;
  const auto count = r.uint(4);
  if (count != by_name.size()) {
    throw std::runtime_error(path.string() + ": tensor count " + std::to_string(count) + " does not match network (" +
                             std::to_string(by_name.size()) + ")");
  }
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::string name = r.str(r.uint(4));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error(path.string() + ": unknown tensor " + name);
    Param<float>& p = *it->second;
    const auto rank = r.uint(4);
    std::vector<int> dims;
    for (std::uint64_t d = 0; d < rank; ++d) dims.push_back(static_cast<int>(r.uint(4)));
    const auto n = r.uint(8);
    if (dims != p.dims || n != p.value.size()) throw std::runtime_error(path.string() + ": shape mismatch for " + name);
    for (auto& v : p.value) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4)));
  }
  if (!r.done()) throw std::runtime_error(path.string() + ": trailing bytes after tensor table");
  return ck;
}

}  // namespace dgseg
