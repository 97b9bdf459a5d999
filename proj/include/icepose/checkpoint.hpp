#pragma once

#include <string>

#include "icepose/vit.hpp"

namespace icepose {

// Checkpoint framing (little-endian):
//   "ICEVIT01", u32 version, u32 x 7 config (image_h, image_w, patch,
//   embed_dim, depth, heads, mlp_ratio), u32 tensor count, then per tensor in
//   for_each_param order: u32 name length, name bytes, u32 rank, u32 dims...,
//   f64 values, u32 CRC-32 of the value bytes.
inline constexpr char kCheckpointMagic[9] = "ICEVIT01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ViTConfig& config,
                     const ViTParams& params);

struct Checkpoint {
  ViTConfig config;
  ViTParams params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace icepose
