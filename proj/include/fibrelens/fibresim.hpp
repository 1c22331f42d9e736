#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fibrelens/complex_matrix.hpp"
#include "fibrelens/dataset.hpp"

namespace fibrelens {

struct FibreConfig {
  std::size_t input_pixels = 28 * 28;
  std::size_t output_pixels = 40 * 40;
  std::size_t mode_count = 256;
  double noise_floor = 0.0;      // noise std relative to the frame maximum
  std::uint32_t quant_levels = 100;
  std::uint64_t rng_seed = 0;

  // Throws ArgumentError on an invalid configuration.
  void validate() const;
};

// Transmission matrix T (output_pixels x input_pixels) of a simulated fibre.
//
// T = A B with B (modes x inputs) i.i.d. circular Gaussian of variance
// 1/mode_count coupling the input pixels into the guided modes, and A
// (outputs x modes) mapping modes onto the camera. Columns of A are random
// superpositions of the lowest spatial frequencies of the output grid,
// so every entry of A is circular Gaussian with variance 1/output_pixels
// and speckle grains shrink as mode_count grows. rank(T) <= mode_count.
ComplexMatrix generate_fibre(const FibreConfig& cfg);

// |T sqrt(image)|^2 reshaped to the square speckle grid.
IntensityFrame propagate(const ComplexMatrix& transmission, const ImagePlane& image);

// Camera model: additive Gaussian noise of std noise_floor * max, clamp at
// zero, normalise the frame maximum to one, quantise to quant_levels.
ImagePlane measure(const IntensityFrame& intensity, const FibreConfig& cfg);
ImagePlane measure(const IntensityFrame& intensity, const FibreConfig& cfg, std::uint64_t seed);

// propagate -> measure -> crop_speckle for every image. Record i draws its
// camera noise from seed rng_seed ^ i. crop_dim 0 keeps the full speckle.
PairSet batch_transmit(const ComplexMatrix& transmission, std::span<const ImagePlane> images,
                       const FibreConfig& cfg, std::size_t crop_dim = 0);

// Slow drift between two independent fibres: T(theta) = cos(theta) T0 +
// sin(theta) T1 with theta evenly spaced over [0, pi/2]. T0 uses
// cfg.rng_seed, T1 a seed derived from it. Returns the camera frame of
// `probe` at each step; frame k draws noise from seed rng_seed ^ k.
std::vector<ImagePlane> drift_frames(const FibreConfig& cfg, std::size_t steps, const ImagePlane& probe);

// Lag (in pixels) at which the mean normalised intensity autocorrelation of
// the frame, along rows and columns, first drops below 1/e.
double autocorrelation_width(const IntensityFrame& frame);

}  // namespace fibrelens
