#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fibrelens/inversion.hpp"

namespace fibrelens {

// "MMFW" weight container, little-endian:
//   magic 4D 4D 46 57 | u32 version | u32 out_dim | u32 in_dim | u32 epoch |
//   f32 lambda | f32 lr | u64 rng_seed | out_dim²·in_dim² × (f32 re, f32 im)
// Rows are output pixels. Simulated transmission matrices use the same
// container with out_dim = speckle side and in_dim = image side.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 36;

struct CheckpointMeta {
  std::uint32_t epoch = 0;
  float lambda = 0.0f;
  float lr = 0.0f;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  InverseModel model;
  CheckpointMeta meta;
};

std::vector<std::uint8_t> encode_checkpoint(const InverseModel& model, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> data);

void save_checkpoint(const std::filesystem::path& path, const InverseModel& model,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fibrelens
