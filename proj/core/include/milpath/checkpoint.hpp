#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "milpath/model.hpp"

namespace milpath {

struct Checkpoint {
    MilModel model;
    std::string config_hash;
};

// Binary layout (little-endian): "MILC" | u16 version | u32 header length |
// JSON header (model config, extractor order, config hash, tensor names and
// sizes) | every tensor's values as f64 in MilModel::tensors() order.
// Round trips are bit-exact.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// JSON form; doubles are printed with round-trip precision.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

/// Picks the binary or JSON form from the extension (".json" => JSON).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace milpath
