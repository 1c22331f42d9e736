#include <doctest.h>

#include <cstring>

#include "fibrelens/checkpoint.hpp"
#include "fibrelens/error.hpp"
#include "fibrelens/random.hpp"
#include "fibrelens/spkl.hpp"
#include "oracle.hpp"

using namespace fibrelens;
using Bytes = std::vector<std::uint8_t>;

namespace {

std::uint32_t le32(const Bytes& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

float lef32(const Bytes& b, std::size_t at) {
  const std::uint32_t bits = le32(b, at);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

FormatError::Kind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError raised");
  return FormatError::Kind::corrupt_header;
}

InverseModel random_model(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
  Rng rng(seed);
  ComplexMatrix w(out_dim * out_dim, in_dim * in_dim);
  for (auto& z : w.entries()) z = cfloat(static_cast<float>(rng.normal()), static_cast<float>(rng.normal()));
  return InverseModel(out_dim, in_dim, w);
}

PairSet random_pairs(std::size_t count, std::size_t speckle_dim, std::size_t image_dim, std::uint64_t seed) {
  Rng rng(seed);
  PairSet set;
  for (std::size_t i = 0; i < count; ++i) {
    SpeckleRecord r;
    r.amplitudes.resize(speckle_dim * speckle_dim);
    for (auto& v : r.amplitudes) v = static_cast<float>(rng.uniform());
    r.source_dim = speckle_dim;
    r.crop_dim = speckle_dim;
    set.add(std::move(r), random_pattern(image_dim, rng.next_u64()));
  }
  return set;
}

}  // namespace

TEST_CASE("checkpoint header layout is little-endian at fixed offsets") {
  const InverseModel m = random_model(2, 3, 1);
  const CheckpointMeta meta{7, 0.03f, 1e-5f, 0x0102030405060708ULL};
  const Bytes b = encode_checkpoint(m, meta);
  REQUIRE(b.size() == kCheckpointHeaderBytes + 4 * 9 * 8);
  CHECK(Bytes(b.begin(), b.begin() + 4) == Bytes{0x4D, 0x4D, 0x46, 0x57});
  CHECK(le32(b, 4) == 1);
  CHECK(le32(b, 8) == 2);
  CHECK(le32(b, 12) == 3);
  CHECK(le32(b, 16) == 7);
  CHECK(lef32(b, 20) == 0.03f);
  CHECK(lef32(b, 24) == 1e-5f);
  CHECK(b[28] == 0x08);
  CHECK(b[35] == 0x01);
  // Row 1, column 2 sits at entry index 1 * 9 + 2, real part then imaginary part.
  const std::size_t at = kCheckpointHeaderBytes + 8 * (9 + 2);
  CHECK(lef32(b, at) == m.weights()(1, 2).real());
  CHECK(lef32(b, at + 4) == m.weights()(1, 2).imag());
}

TEST_CASE("checkpoint save/load is bit-exact") {
  const auto dir = oracle::scratch_dir("formats_ck");
  InverseModel m = random_model(3, 4, 2);
  m.weights()(0, 0) = cfloat(-0.0f, std::numeric_limits<float>::denorm_min());
  m.weights()(1, 1) = cfloat(std::numeric_limits<float>::max(), std::numeric_limits<float>::lowest());
  const CheckpointMeta meta{850, 0.03f, 1e-8f, 42};
  save_checkpoint(dir / "m.mmfw", m, meta);
  const Checkpoint back = load_checkpoint(dir / "m.mmfw");
  CHECK(std::memcmp(back.model.weights().entries().data(), m.weights().entries().data(),
                    m.weights().size() * sizeof(cfloat)) == 0);
  CHECK(back.meta == meta);
  CHECK(back.model.out_dim() == 3);
  CHECK(back.model.in_dim() == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("every truncation of a checkpoint is rejected") {
  const Bytes b = encode_checkpoint(random_model(2, 2, 3), {});
  for (std::size_t len = 0; len < b.size(); ++len) {
    const Bytes prefix(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(len));
    CAPTURE(len);
    CHECK(kind_of([&] { decode_checkpoint(prefix); }) == FormatError::Kind::truncated);
  }
}

TEST_CASE("checkpoint header corruption maps to distinct kinds") {
  const Bytes good = encode_checkpoint(random_model(2, 2, 4), {});
  Bytes v = good;
  v[4] = 99;
  CHECK(kind_of([&] { decode_checkpoint(v); }) == FormatError::Kind::unknown_version);
  Bytes magic = good;
  magic[3] = 'X';
  CHECK(kind_of([&] { decode_checkpoint(magic); }) == FormatError::Kind::corrupt_header);
  Bytes zero = good;
  zero[8] = 0;
  CHECK(kind_of([&] { decode_checkpoint(zero); }) == FormatError::Kind::corrupt_header);
  Bytes longer = good;
  longer.push_back(0);
  CHECK(kind_of([&] { decode_checkpoint(longer); }) == FormatError::Kind::corrupt_header);
  Bytes nan = good;
  nan[kCheckpointHeaderBytes + 3] = 0x7F;
  nan[kCheckpointHeaderBytes + 2] = 0xC0;
  CHECK(kind_of([&] { decode_checkpoint(nan); }) == FormatError::Kind::corrupt_header);
}

TEST_CASE("missing checkpoint is an I/O error") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/fibrelens/model.mmfw"), IoError);
}

TEST_CASE("SPKL header and payload layout") {
  const PairSet set = random_pairs(2, 3, 2, 5);
  const Bytes b = encode_spkl(set);
  REQUIRE(b.size() == 20 + 2 * 4 * (9 + 4));
  CHECK(Bytes(b.begin(), b.begin() + 4) == Bytes{0x53, 0x50, 0x4B, 0x4C});
  CHECK(le32(b, 4) == kSpklVersion);
  CHECK(le32(b, 8) == 2);
  CHECK(le32(b, 12) == 9);
  CHECK(le32(b, 16) == 4);
  CHECK(lef32(b, 20) == set[0].speckle.amplitudes[0]);
  CHECK(lef32(b, 20 + 4 * 9) == set[0].image.values()[0]);
  CHECK(lef32(b, 20 + 4 * 13) == set[1].speckle.amplitudes[0]);
}

TEST_CASE("SPKL round trip is bit-exact, including image-only sets") {
  const auto dir = oracle::scratch_dir("formats_spkl");
  for (std::size_t speckle_dim : {std::size_t{0}, std::size_t{4}}) {
    PairSet set;
    if (speckle_dim == 0) {
      for (int i = 0; i < 3; ++i) set.add(SpeckleRecord{}, random_pattern(5, static_cast<std::uint64_t>(i)));
    } else {
      set = random_pairs(4, speckle_dim, 5, 6);
    }
    write_spkl(dir / "s.spkl", set);
    const PairSet back = read_spkl(dir / "s.spkl");
    REQUIRE(back.size() == set.size());
    CHECK(back.speckle_length() == set.speckle_length());
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(back[i].image == set[i].image);
      CHECK(back[i].speckle.amplitudes == set[i].speckle.amplitudes);
    }
    CHECK(encode_spkl(back) == oracle::file_bytes(dir / "s.spkl"));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("SPKL corruption maps to distinct kinds") {
  const Bytes good = encode_spkl(random_pairs(3, 2, 2, 7));
  for (std::size_t len = 0; len < good.size(); ++len) {
    const Bytes prefix(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(len));
    CAPTURE(len);
    CHECK(kind_of([&] { decode_spkl(prefix); }) == FormatError::Kind::truncated);
  }
  Bytes v = good;
  v[4] = 99;
  CHECK(kind_of([&] { decode_spkl(v); }) == FormatError::Kind::unknown_version);
  Bytes magic = good;
  magic[0] = 0;
  CHECK(kind_of([&] { decode_spkl(magic); }) == FormatError::Kind::corrupt_header);
  Bytes longer = good;
  longer.push_back(1);
  CHECK(kind_of([&] { decode_spkl(longer); }) == FormatError::Kind::corrupt_header);
  Bytes negative = good;
  negative[23] = 0xBF;  // first speckle amplitude becomes negative
  CHECK(kind_of([&] { decode_spkl(negative); }) == FormatError::Kind::corrupt_header);
  Bytes not_square = good;
  not_square[16] = 3;  // image length 3 is not a square
  CHECK(kind_of([&] { decode_spkl(not_square); }) != FormatError::Kind::unknown_version);
}

TEST_CASE("square_side") {
  CHECK(square_side(0) == 0);
  CHECK(square_side(1600) == 40);
  CHECK_THROWS_AS(square_side(1601), ArgumentError);
}
