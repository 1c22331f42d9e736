#include "fibrelens/spkl.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fibrelens/binary_io.hpp"
#include "fibrelens/error.hpp"

namespace fibrelens {

namespace binary {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path);
  return data;
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace binary

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x53, 0x50, 0x4B, 0x4C};

}  // namespace

std::size_t square_side(std::size_t n) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) throw ArgumentError(std::to_string(n) + " is not a square pixel count");
  return side;
}

std::vector<std::uint8_t> encode_spkl(const PairSet& pairs) {
  binary::Writer w;
  w.bytes(kMagic);
  w.u32(kSpklVersion);
  w.u32(static_cast<std::uint32_t>(pairs.size()));
  w.u32(static_cast<std::uint32_t>(pairs.speckle_length()));
  w.u32(static_cast<std::uint32_t>(pairs.image_length()));
  for (const auto& pair : pairs.records()) {
    for (float a : pair.speckle.amplitudes) w.f32(a);
    for (float v : pair.image.values()) w.f32(v);
  }
  return w.buffer();
}

PairSet decode_spkl(std::span<const std::uint8_t> data) {
  using Kind = FormatError::Kind;
  binary::Reader r(data);
  if (data.size() < kMagic.size()) throw FormatError(Kind::truncated, "SPKL header truncated");
  const auto magic = r.bytes(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw FormatError(Kind::corrupt_header, "not an SPKL file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kSpklVersion) {
    throw FormatError(Kind::unknown_version, "unsupported SPKL version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t speckle_len = r.u32();
  const std::uint32_t image_len = r.u32();

  std::size_t speckle_side = 0;
  std::size_t image_side = 0;
  try {
    speckle_side = square_side(speckle_len);
    image_side = square_side(image_len);
  } catch (const ArgumentError& e) {
    throw FormatError(Kind::corrupt_header, std::string("SPKL header: ") + e.what());
  }
  if (count > 0 && image_len == 0) throw FormatError(Kind::corrupt_header, "SPKL image length is zero");

  const std::uint64_t payload = std::uint64_t{count} * (std::uint64_t{speckle_len} + image_len) * 4;
  if (r.remaining() < payload) {
    throw FormatError(Kind::truncated, "SPKL payload truncated: expected " + std::to_string(payload) +
                                           " bytes, found " + std::to_string(r.remaining()));
  }
  if (r.remaining() > payload) {
    throw FormatError(Kind::corrupt_header, "SPKL file has trailing bytes after the payload");
  }

  PairSet pairs;
  pairs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SpeckleRecord speckle;
    speckle.source_dim = speckle_side;
    speckle.crop_dim = speckle_side;
    speckle.amplitudes.resize(speckle_len);
    for (auto& a : speckle.amplitudes) a = r.f32();
    std::vector<float> image(image_len);
    for (auto& v : image) v = r.f32();
    try {
      speckle.validate();
      pairs.add(std::move(speckle), ImagePlane(image_side, image_side, std::move(image)));
    } catch (const ArgumentError& e) {
      throw FormatError(Kind::corrupt_header,
                        "SPKL record " + std::to_string(i) + " invalid: " + e.what());
    }
  }
  return pairs;
}

void write_spkl(const std::filesystem::path& path, const PairSet& pairs) {
  binary::write_file(path.string(), encode_spkl(pairs));
}

PairSet read_spkl(const std::filesystem::path& path) {
  return decode_spkl(binary::read_file(path.string()));
}

}  // namespace fibrelens
