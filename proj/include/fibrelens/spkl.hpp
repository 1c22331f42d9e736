#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fibrelens/dataset.hpp"

namespace fibrelens {

// "SPKL" pair container: magic, u32 version, u32 record count, u32 speckle
// length, u32 image length, then per record the speckle amplitudes and the
// image intensities as little-endian f32. A speckle length of zero stores
// images only.
inline constexpr std::uint32_t kSpklVersion = 1;

std::vector<std::uint8_t> encode_spkl(const PairSet& pairs);
PairSet decode_spkl(std::span<const std::uint8_t> data);

void write_spkl(const std::filesystem::path& path, const PairSet& pairs);
PairSet read_spkl(const std::filesystem::path& path);

// Side of a square with `n` pixels; throws ArgumentError when n is not a perfect square.
std::size_t square_side(std::size_t n);

}  // namespace fibrelens
