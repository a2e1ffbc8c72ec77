#pragma once

#include <filesystem>
#include <string>

#include "dgseg/network.hpp"
#include "json.hpp"

namespace dgseg {

nlohmann::ordered_json network_config_to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Binary checkpoint layout (all integers little-endian):
///
///   u8   version
///   u32  length of the JSON header, then the header bytes
///        {"network": <config>, "meta": <caller metadata>}
///   u32  tensor count, then per tensor:
///        u32 name length, name bytes, u32 rank, rank x u32 dims,
///        u64 value count, values as IEEE-754 float32
///
/// Tensors are the network state (parameters then normalization buffers).
void save_checkpoint(Network<float>& net, const std::filesystem::path& path,
                     const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());

struct LoadedCheckpoint {
  Network<float> network;
  nlohmann::json meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dgseg
