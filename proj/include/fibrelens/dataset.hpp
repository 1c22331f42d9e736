#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fibrelens {

// Normalised intensity image, values in [0, 1], row-major.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(std::size_t width, std::size_t height, float fill = 0.0f);
  ImagePlane(std::size_t width, std::size_t height, std::vector<float> values);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> values_;
};

// Unnormalised nonnegative intensity, e.g. a raw camera frame or a propagated speckle.
struct IntensityFrame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

IntensityFrame to_frame(const ImagePlane& plane);

struct RgbImage {
  ImagePlane r;
  ImagePlane g;
  ImagePlane b;

  std::size_t width() const noexcept { return r.width(); }
  std::size_t height() const noexcept { return r.height(); }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Speckle amplitudes (square root of the recorded intensity).
struct SpeckleRecord {
  std::vector<float> amplitudes;
  std::size_t source_dim = 0;
  std::size_t crop_dim = 0;
  std::string tag;

  // Throws ArgumentError when the amplitudes are negative or do not fill crop_dim².
  void validate() const;
};

struct Split {
  std::size_t train = 0;
  std::size_t validation = 0;

  friend bool operator==(const Split&, const Split&) = default;
};

// Ordered speckle/image pairs with a training/validation partition. The
// validation records are the last `split().validation` entries.
class PairSet {
 public:
  struct Pair {
    SpeckleRecord speckle;
    ImagePlane image;
  };

  // Validation gets the same 10% share as the original 45,000/5,000 split.
  static Split proportional_split(std::size_t total);

  void add(SpeckleRecord speckle, ImagePlane image);
  void reserve(std::size_t n) { records_.reserve(n); }

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Pair& operator[](std::size_t i) const { return records_[i]; }
  std::span<const Pair> records() const noexcept { return records_; }

  std::size_t speckle_length() const noexcept { return speckle_length_; }
  std::size_t image_width() const noexcept { return image_width_; }
  std::size_t image_height() const noexcept { return image_height_; }
  std::size_t image_length() const noexcept { return image_width_ * image_height_; }

  Split split() const;
  void set_split(Split split);

 private:
  std::vector<Pair> records_;
  std::size_t speckle_length_ = 0;
  std::size_t image_width_ = 0;
  std::size_t image_height_ = 0;
  std::optional<Split> split_;
};

enum class ColorMode { grayscale, rgb };

// PNG ingestion with box resampling to target_side x target_side.
ImagePlane load_grayscale(const std::filesystem::path& path, std::size_t target_side);
RgbImage load_rgb(const std::filesystem::path& path, std::size_t target_side);
std::variant<ImagePlane, RgbImage> load_image(const std::filesystem::path& path,
                                              std::size_t target_side, ColorMode mode);

// 8-bit PNG output, value = round(v * 255).
void write_png(const std::filesystem::path& path, const ImagePlane& plane);
void write_png(const std::filesystem::path& path, const RgbImage& image);

// Area-average resampling of a row-major width x height field.
std::vector<double> area_resample(std::span<const double> values, std::size_t width,
                                  std::size_t height, std::size_t out_width,
                                  std::size_t out_height);

std::vector<float> intensity_to_amplitude(const ImagePlane& plane);

std::array<ImagePlane, 3> split_rgb(const RgbImage& image);
RgbImage merge_rgb(ImagePlane r, ImagePlane g, ImagePlane b);

// Maps v in [0, 1] onto `levels` uniform levels, round(v * (levels - 1)) / (levels - 1).
double quantize(double v, std::uint32_t levels);

// Pixels i.i.d. uniform on {0, 1/99, ..., 1}.
ImagePlane random_pattern(std::size_t side, std::uint64_t seed);

// Centre-crops `raw` to crop_side x crop_side (0 selects the largest centred
// square), area-averages down to crop_dim x crop_dim and converts to amplitudes.
SpeckleRecord crop_speckle(const IntensityFrame& raw, std::size_t crop_dim,
                           std::size_t crop_side = 0);

// Manifest: one path per line, relative to the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    std::span<const std::filesystem::path> entries);

}  // namespace fibrelens
