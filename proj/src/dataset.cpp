#include "fibrelens/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "fibrelens/error.hpp"
#include "fibrelens/random.hpp"

namespace fibrelens {

namespace fs = std::filesystem;

ImagePlane::ImagePlane(std::size_t width, std::size_t height, float fill)
    : ImagePlane(width, height, std::vector<float>(width * height, fill)) {}

ImagePlane::ImagePlane(std::size_t width, std::size_t height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != width_ * height_) {
    throw ArgumentError("image " + std::to_string(width_) + "x" + std::to_string(height_) +
                        " given " + std::to_string(values_.size()) + " values");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ArgumentError("image value " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

IntensityFrame to_frame(const ImagePlane& plane) {
  IntensityFrame frame{plane.width(), plane.height(), {}};
  frame.values.assign(plane.values().begin(), plane.values().end());
  return frame;
}

void SpeckleRecord::validate() const {
  if (amplitudes.size() != crop_dim * crop_dim) {
    throw ArgumentError("speckle record has " + std::to_string(amplitudes.size()) +
                        " amplitudes, expected " + std::to_string(crop_dim * crop_dim));
  }
  for (float a : amplitudes) {
    if (!(a >= 0.0f) || !std::isfinite(a)) throw ArgumentError("speckle amplitude is negative or not finite");
  }
}

Split PairSet::proportional_split(std::size_t total) {
  const auto validation = static_cast<std::size_t>(std::llround(static_cast<double>(total) * 0.1));
  return {total - validation, validation};
}

void PairSet::add(SpeckleRecord speckle, ImagePlane image) {
  speckle.validate();
  if (records_.empty()) {
    speckle_length_ = speckle.amplitudes.size();
    image_width_ = image.width();
    image_height_ = image.height();
  } else if (speckle.amplitudes.size() != speckle_length_ || image.width() != image_width_ ||
             image.height() != image_height_) {
    throw ArgumentError("pair dimensions differ from the rest of the set");
  }
  records_.push_back({std::move(speckle), std::move(image)});
}

Split PairSet::split() const { return split_ ? *split_ : proportional_split(records_.size()); }

void PairSet::set_split(Split split) {
  if (split.train + split.validation != records_.size()) {
    throw ArgumentError("split " + std::to_string(split.train) + "+" +
                        std::to_string(split.validation) + " does not cover " +
                        std::to_string(records_.size()) + " records");
  }
  split_ = split;
}

namespace {

struct RawRgb {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

RawRgb decode_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RawRgb raw{image.width, image.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, raw.pixels.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  return raw;
}

void check_target(std::size_t target_side) {
  if (target_side == 0) throw ArgumentError("target side must be positive");
}

std::vector<float> to_unit_floats(const std::vector<double>& values) {
  std::vector<float> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); });
  return out;
}

ImagePlane resampled(const std::vector<double>& values, std::size_t width, std::size_t height,
                     std::size_t side) {
  return ImagePlane(side, side, to_unit_floats(area_resample(values, width, height, side, side)));
}

// Per-axis overlap weights of the box filter.
struct Tap {
  std::size_t source;
  double weight;
};

std::vector<std::vector<Tap>> box_taps(std::size_t in, std::size_t out) {
  std::vector<std::vector<Tap>> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const double lo = static_cast<double>(o) * scale;
    const double hi = static_cast<double>(o + 1) * scale;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(in, static_cast<std::size_t>(std::ceil(hi)));
    for (std::size_t s = first; s < last; ++s) {
      const double w = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (w > 0.0) taps[o].push_back({s, w});
    }
  }
  return taps;
}

double weighted_mean(const std::vector<Tap>& taps, auto&& sample) {
  double acc = 0.0;
  double total = 0.0;
  for (const auto& tap : taps) {
    acc += tap.weight * sample(tap.source);
    total += tap.weight;
  }
  return acc / total;
}

}  // namespace

std::vector<double> area_resample(std::span<const double> values, std::size_t width,
                                  std::size_t height, std::size_t out_width,
                                  std::size_t out_height) {
  if (values.size() != width * height) throw ArgumentError("resample input size mismatch");
  if (width == 0 || height == 0 || out_width == 0 || out_height == 0) {
    throw ArgumentError("resample dimensions must be positive");
  }
  if (width == out_width && height == out_height) return {values.begin(), values.end()};

  const auto xtaps = box_taps(width, out_width);
  const auto ytaps = box_taps(height, out_height);

  std::vector<double> rows(height * out_width);
  for (std::size_t y = 0; y < height; ++y) {
    const double* src = values.data() + y * width;
    for (std::size_t ox = 0; ox < out_width; ++ox) {
      rows[y * out_width + ox] = weighted_mean(xtaps[ox], [&](std::size_t s) { return src[s]; });
    }
  }
  std::vector<double> out(out_height * out_width);
  for (std::size_t oy = 0; oy < out_height; ++oy) {
    for (std::size_t ox = 0; ox < out_width; ++ox) {
      out[oy * out_width + ox] =
          weighted_mean(ytaps[oy], [&](std::size_t s) { return rows[s * out_width + ox]; });
    }
  }
  return out;
}

ImagePlane load_grayscale(const fs::path& path, std::size_t target_side) {
  check_target(target_side);
  const RawRgb raw = decode_png(path);
  std::vector<double> luma(raw.width * raw.height);
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const std::uint8_t r = raw.pixels[3 * i];
    const std::uint8_t g = raw.pixels[3 * i + 1];
    const std::uint8_t b = raw.pixels[3 * i + 2];
    if (r == g && g == b) {
      luma[i] = r / 255.0;
    } else {
      luma[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    }
  }
  return resampled(luma, raw.width, raw.height, target_side);
}

RgbImage load_rgb(const fs::path& path, std::size_t target_side) {
  check_target(target_side);
  const RawRgb raw = decode_png(path);
  std::array<std::vector<double>, 3> channels;
  for (auto& c : channels) c.resize(raw.width * raw.height);
  for (std::size_t i = 0; i < raw.width * raw.height; ++i) {
    for (std::size_t c = 0; c < 3; ++c) channels[c][i] = raw.pixels[3 * i + c] / 255.0;
  }
  return merge_rgb(resampled(channels[0], raw.width, raw.height, target_side),
                   resampled(channels[1], raw.width, raw.height, target_side),
                   resampled(channels[2], raw.width, raw.height, target_side));
}

std::variant<ImagePlane, RgbImage> load_image(const fs::path& path, std::size_t target_side,
                                              ColorMode mode) {
  if (mode == ColorMode::rgb) return load_rgb(path, target_side);
  return load_grayscale(path, target_side);
}

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void encode_png(const fs::path& path, std::size_t width, std::size_t height,
                std::uint32_t format, const std::vector<std::uint8_t>& pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

}  // namespace

void write_png(const fs::path& path, const ImagePlane& plane) {
  std::vector<std::uint8_t> pixels(plane.size());
  std::transform(plane.values().begin(), plane.values().end(), pixels.begin(), to_byte);
  encode_png(path, plane.width(), plane.height(), PNG_FORMAT_GRAY, pixels);
}

void write_png(const fs::path& path, const RgbImage& image) {
  const std::size_t n = image.r.size();
  std::vector<std::uint8_t> pixels(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    pixels[3 * i] = to_byte(image.r.values()[i]);
    pixels[3 * i + 1] = to_byte(image.g.values()[i]);
    pixels[3 * i + 2] = to_byte(image.b.values()[i]);
  }
  encode_png(path, image.width(), image.height(), PNG_FORMAT_RGB, pixels);
}

std::vector<float> intensity_to_amplitude(const ImagePlane& plane) {
  std::vector<float> out(plane.size());
  std::transform(plane.values().begin(), plane.values().end(), out.begin(),
                 [](float v) { return std::sqrt(v); });
  return out;
}

std::array<ImagePlane, 3> split_rgb(const RgbImage& image) { return {image.r, image.g, image.b}; }

RgbImage merge_rgb(ImagePlane r, ImagePlane g, ImagePlane b) {
  if (r.width() != g.width() || r.width() != b.width() || r.height() != g.height() ||
      r.height() != b.height()) {
    throw ArgumentError("RGB channels have different dimensions");
  }
  return {std::move(r), std::move(g), std::move(b)};
}

double quantize(double v, std::uint32_t levels) {
  const double steps = static_cast<double>(levels - 1);
  return std::round(v * steps) / steps;
}

ImagePlane random_pattern(std::size_t side, std::uint64_t seed) {
  if (side == 0) throw ArgumentError("pattern side must be positive");
  constexpr std::uint64_t kLevels = 100;
  Rng rng(seed);
  std::vector<float> values(side * side);
  for (auto& v : values) {
    v = static_cast<float>(static_cast<double>(rng.below(kLevels)) / (kLevels - 1));
  }
  return ImagePlane(side, side, std::move(values));
}

SpeckleRecord crop_speckle(const IntensityFrame& raw, std::size_t crop_dim, std::size_t crop_side) {
  const std::size_t max_side = std::min(raw.width, raw.height);
  if (raw.values.size() != raw.width * raw.height) throw ArgumentError("frame size mismatch");
  if (crop_side == 0) crop_side = max_side;
  if (crop_dim == 0) throw ArgumentError("crop dimension must be positive");
  if (crop_side > max_side) {
    throw ArgumentError("crop side " + std::to_string(crop_side) + " exceeds frame side " +
                        std::to_string(max_side));
  }
  if (crop_dim > crop_side) {
    throw ArgumentError("crop dimension " + std::to_string(crop_dim) + " exceeds crop side " +
                        std::to_string(crop_side));
  }

  const std::size_t x0 = (raw.width - crop_side) / 2;
  const std::size_t y0 = (raw.height - crop_side) / 2;
  std::vector<double> window(crop_side * crop_side);
  for (std::size_t y = 0; y < crop_side; ++y) {
    const double* src = raw.values.data() + (y0 + y) * raw.width + x0;
    std::copy(src, src + crop_side, window.begin() + static_cast<std::ptrdiff_t>(y * crop_side));
  }
  const auto small = area_resample(window, crop_side, crop_side, crop_dim, crop_dim);

  SpeckleRecord record;
  record.source_dim = max_side;
  record.crop_dim = crop_dim;
  record.amplitudes.resize(small.size());
  std::transform(small.begin(), small.end(), record.amplitudes.begin(),
                 [](double v) { return static_cast<float>(std::sqrt(std::max(v, 0.0))); });
  return record;
}

std::vector<fs::path> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<fs::path> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    entries.push_back(path.parent_path() / fs::path(std::u8string(line.begin(), line.end())));
  }
  return entries;
}

void write_manifest(const fs::path& path, std::span<const fs::path> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& e : entries) {
    const auto text = e.generic_u8string();
    out << std::string(text.begin(), text.end()) << '\n';
  }
  if (!out) throw IoError("failed writing manifest " + path.string());
}

}  // namespace fibrelens
