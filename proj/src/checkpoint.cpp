#include "fibrelens/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "fibrelens/binary_io.hpp"
#include "fibrelens/error.hpp"

namespace fibrelens {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x4D, 0x4D, 0x46, 0x57};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const InverseModel& model, const CheckpointMeta& meta) {
  binary::Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.out_dim()));
  w.u32(static_cast<std::uint32_t>(model.in_dim()));
  w.u32(meta.epoch);
  w.f32(meta.lambda);
  w.f32(meta.lr);
  w.u64(meta.rng_seed);
  for (const auto& z : model.weights().entries()) {
    w.f32(z.real());
    w.f32(z.imag());
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  using Kind = FormatError::Kind;
  if (data.size() >= kMagic.size() &&
      !std::equal(kMagic.begin(), kMagic.end(), data.begin())) {
    throw FormatError(Kind::corrupt_header, "not a weight file (bad magic)");
  }
  if (data.size() < kCheckpointHeaderBytes) {
    throw FormatError(Kind::truncated, "weight file header truncated (" +
                                           std::to_string(data.size()) + " bytes)");
  }
  binary::Reader r(data);
  r.bytes(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(Kind::unknown_version, "unsupported weight file version " + std::to_string(version));
  }
  const std::uint32_t out_dim = r.u32();
  const std::uint32_t in_dim = r.u32();
  Checkpoint ck;
  ck.meta.epoch = r.u32();
  ck.meta.lambda = r.f32();
  ck.meta.lr = r.f32();
  ck.meta.rng_seed = r.u64();
  if (out_dim == 0 || in_dim == 0) throw FormatError(Kind::corrupt_header, "weight file has zero dimension");

  const std::uint64_t rows = std::uint64_t{out_dim} * out_dim;
  const std::uint64_t cols = std::uint64_t{in_dim} * in_dim;
  const std::uint64_t payload = rows * cols * 8;
  if (r.remaining() < payload) {
    throw FormatError(Kind::truncated, "weight payload truncated: expected " + std::to_string(payload) +
                                           " bytes, found " + std::to_string(r.remaining()));
  }
  if (r.remaining() > payload) {
    throw FormatError(Kind::corrupt_header, "weight file has trailing bytes after the payload");
  }
  std::vector<cfloat> entries(rows * cols);
  for (auto& z : entries) {
    const float re = r.f32();
    const float im = r.f32();
    z = cfloat(re, im);
  }
  ComplexMatrix w(rows, cols, std::move(entries));
  if (!w.all_finite()) throw FormatError(Kind::corrupt_header, "weight file contains non-finite entries");
  ck.model = InverseModel(out_dim, in_dim, std::move(w));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const InverseModel& model,
                     const CheckpointMeta& meta) {
  binary::write_file(path.string(), encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binary::read_file(path.string()));
}

}  // namespace fibrelens
