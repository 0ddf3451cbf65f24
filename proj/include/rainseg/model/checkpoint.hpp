#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rainseg/model/params.hpp"

namespace rainseg {

/// MUNW checkpoint: "MUNW", u16 version, u32 entry count, then per entry
/// u16 name length, name bytes, u8 rank, u32 extents[rank] and the
/// little-endian f32 payload. Batchnorm statistics are stored under
/// `<layer>.running_mean` / `<layer>.running_var`; names starting with
/// "meta." carry auxiliary tensors (model hyperparameters, normalization
/// statistics).
struct Checkpoint {
  ModelParams params;
  std::vector<std::pair<std::string, Tensor>> extras;  // names without the "meta." prefix

  const Tensor* extra(const std::string& name) const;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rainseg
