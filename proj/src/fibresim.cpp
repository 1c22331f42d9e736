#include "fibrelens/fibresim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "fibrelens/error.hpp"
#include "fibrelens/random.hpp"
#include "fibrelens/spkl.hpp"

namespace fibrelens {

namespace {

using MatrixXcd = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kPropagateChunk = 64;

MatrixXcd gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double variance) {
  MatrixXcd m(rows, cols);
  // Row-major fill order so the draw sequence does not depend on storage layout.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.complex_normal(variance);
  }
  return m;
}

// Plane waves of the `count` lowest spatial frequencies on a side x side grid.
MatrixXcd low_frequency_basis(std::size_t side, std::size_t count) {
  const auto n = static_cast<long>(side);
  std::vector<std::tuple<long, long, long>> freqs;  // (|k|^2, fy, fx)
  for (long fy = -n / 2; fy < n - n / 2; ++fy) {
    for (long fx = -n / 2; fx < n - n / 2; ++fx) freqs.emplace_back(fx * fx + fy * fy, fy, fx);
  }
  std::sort(freqs.begin(), freqs.end());

  const double norm = 1.0 / static_cast<double>(side);  // 1/sqrt(side^2)
  MatrixXcd basis(side * side, count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto [k2, fy, fx] = freqs[k];
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        // Reduce the phase index modulo side to keep the argument small and exact.
        const long idx = ((fx * static_cast<long>(x) + fy * static_cast<long>(y)) % n + n) % n;
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(idx) / static_cast<double>(n);
        basis(static_cast<long>(y * side + x), static_cast<long>(k)) =
            std::polar(norm, phase);
      }
    }
  }
  return basis;
}

// Intensities |T s|^2 for a block of amplitude columns.
RowMatrixXd propagate_block(const RowMatrixXd& t_re, const RowMatrixXd& t_im,
                            const Eigen::MatrixXd& amplitudes) {
  const Eigen::MatrixXd y_re = t_re * amplitudes;
  const Eigen::MatrixXd y_im = t_im * amplitudes;
  return (y_re.array().square() + y_im.array().square()).matrix();
}

void split_parts(const ComplexMatrix& t, RowMatrixXd& re, RowMatrixXd& im) {
  re.resize(static_cast<long>(t.rows()), static_cast<long>(t.cols()));
  im.resize(static_cast<long>(t.rows()), static_cast<long>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      re(static_cast<long>(r), static_cast<long>(c)) = t(r, c).real();
      im(static_cast<long>(r), static_cast<long>(c)) = t(r, c).imag();
    }
  }
}

void check_image(const ComplexMatrix& t, const ImagePlane& image) {
  if (image.size() != t.cols()) {
    throw ArgumentError("image has " + std::to_string(image.size()) +
                        " pixels but the transmission matrix expects " + std::to_string(t.cols()));
  }
}

}  // namespace

void FibreConfig::validate() const {
  if (input_pixels == 0 || output_pixels == 0) throw ArgumentError("pixel counts must be positive");
  if (mode_count < 1) throw ArgumentError("mode_count must be at least 1");
  if (quant_levels < 2) throw ArgumentError("quant_levels must be at least 2");
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) {
    throw ArgumentError("noise_floor must be a nonnegative number");
  }
  square_side(input_pixels);
  square_side(output_pixels);
}

ComplexMatrix generate_fibre(const FibreConfig& cfg) {
  cfg.validate();
  const std::size_t side = square_side(cfg.output_pixels);
  const std::size_t spatial = std::min(cfg.mode_count, cfg.output_pixels);

  Rng rng(cfg.rng_seed);
  const MatrixXcd coupling = gaussian_matrix(rng, cfg.mode_count, cfg.input_pixels,
                                             1.0 / static_cast<double>(cfg.mode_count));
  const MatrixXcd mixing =
      gaussian_matrix(rng, spatial, cfg.mode_count, 1.0 / static_cast<double>(spatial));
  const MatrixXcd modes_to_camera = low_frequency_basis(side, spatial) * mixing;
  const MatrixXcd t = modes_to_camera * coupling;

  ComplexMatrix out(cfg.output_pixels, cfg.input_pixels);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const auto z = t(static_cast<long>(r), static_cast<long>(c));
      out(r, c) = cfloat(static_cast<float>(z.real()), static_cast<float>(z.imag()));
    }
  }
  return out;
}

IntensityFrame propagate(const ComplexMatrix& transmission, const ImagePlane& image) {
  check_image(transmission, image);
  const std::size_t side = square_side(transmission.rows());
  RowMatrixXd re, im;
  split_parts(transmission, re, im);
  Eigen::MatrixXd s(static_cast<long>(image.size()), 1);
  for (std::size_t j = 0; j < image.size(); ++j) s(static_cast<long>(j), 0) = std::sqrt(double{image.values()[j]});
  const RowMatrixXd out = propagate_block(re, im, s);
  IntensityFrame frame{side, side, std::vector<double>(out.data(), out.data() + out.size())};
  return frame;
}

ImagePlane measure(const IntensityFrame& intensity, const FibreConfig& cfg) {
  return measure(intensity, cfg, cfg.rng_seed);
}

ImagePlane measure(const IntensityFrame& intensity, const FibreConfig& cfg, std::uint64_t seed) {
  if (intensity.values.size() != intensity.width * intensity.height) {
    throw ArgumentError("frame size mismatch");
  }
  if (cfg.quant_levels < 2) throw ArgumentError("quant_levels must be at least 2");
  const auto peak_it = std::max_element(intensity.values.begin(), intensity.values.end());
  const double peak = peak_it == intensity.values.end() ? 0.0 : *peak_it;

  std::vector<double> noisy(intensity.values);
  if (cfg.noise_floor > 0.0 && peak > 0.0) {
    Rng rng(seed);
    const double sigma = cfg.noise_floor * peak;
    for (auto& v : noisy) v = std::max(0.0, v + sigma * rng.normal());
  }

  const double top = noisy.empty() ? 0.0 : *std::max_element(noisy.begin(), noisy.end());
  std::vector<float> out(noisy.size(), 0.0f);
  if (top > 0.0) {
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      out[i] = static_cast<float>(quantize(noisy[i] / top, cfg.quant_levels));
    }
  }
  return ImagePlane(intensity.width, intensity.height, std::move(out));
}

PairSet batch_transmit(const ComplexMatrix& transmission, std::span<const ImagePlane> images,
                       const FibreConfig& cfg, std::size_t crop_dim) {
  PairSet pairs;
  if (images.empty()) return pairs;
  const std::size_t side = square_side(transmission.rows());
  if (crop_dim == 0) crop_dim = side;

  RowMatrixXd re, im;
  split_parts(transmission, re, im);
  pairs.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kPropagateChunk) {
    const std::size_t count = std::min(kPropagateChunk, images.size() - start);
    Eigen::MatrixXd s(static_cast<long>(transmission.cols()), static_cast<long>(count));
    for (std::size_t k = 0; k < count; ++k) {
      const ImagePlane& image = images[start + k];
      check_image(transmission, image);
      for (std::size_t j = 0; j < image.size(); ++j) {
        s(static_cast<long>(j), static_cast<long>(k)) = std::sqrt(double{image.values()[j]});
      }
    }
    const RowMatrixXd block = propagate_block(re, im, s);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t index = start + k;
      IntensityFrame frame{side, side, std::vector<double>(transmission.rows())};
      for (std::size_t p = 0; p < transmission.rows(); ++p) {
        frame.values[p] = block(static_cast<long>(p), static_cast<long>(k));
      }
      const ImagePlane camera = measure(frame, cfg, cfg.rng_seed ^ index);
      SpeckleRecord record = crop_speckle(to_frame(camera), crop_dim);
      record.tag = "sim:" + std::to_string(index);
      pairs.add(std::move(record), images[start + k]);
    }
  }
  return pairs;
}

std::vector<ImagePlane> drift_frames(const FibreConfig& cfg, std::size_t steps, const ImagePlane& probe) {
  if (steps < 2) throw ArgumentError("drift needs at least two steps");
  const ComplexMatrix t0 = generate_fibre(cfg);
  FibreConfig other = cfg;
  other.rng_seed = derive_seed(cfg.rng_seed, 1);
  const ComplexMatrix t1 = generate_fibre(other);
  check_image(t0, probe);

  std::vector<ImagePlane> frames;
  frames.reserve(steps);
  ComplexMatrix t(t0.rows(), t0.cols());
  for (std::size_t k = 0; k < steps; ++k) {
    const double theta = (std::numbers::pi / 2.0) * static_cast<double>(k) / static_cast<double>(steps - 1);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t i = 0; i < t.entries().size(); ++i) {
      const std::complex<double> a(t0.entries()[i]);
      const std::complex<double> b(t1.entries()[i]);
      const std::complex<double> z = c * a + s * b;
      t.entries()[i] = cfloat(static_cast<float>(z.real()), static_cast<float>(z.imag()));
    }
    frames.push_back(measure(propagate(t, probe), cfg, cfg.rng_seed ^ k));
  }
  return frames;
}

double autocorrelation_width(const IntensityFrame& frame) {
  const std::size_t w = frame.width;
  const std::size_t h = frame.height;
  if (w < 2 || h < 2 || frame.values.size() != w * h) throw ArgumentError("frame too small");
  double mean = 0.0;
  for (double v : frame.values) mean += v;
  mean /= static_cast<double>(frame.values.size());

  const std::size_t max_lag = std::min(w, h) / 2;
  std::vector<double> corr(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double c = frame.values[y * w + x] - mean;
        acc += c * (frame.values[y * w + (x + lag) % w] - mean);
        acc += c * (frame.values[((y + lag) % h) * w + x] - mean);
      }
    }
    corr[lag] = acc;
  }
  if (corr[0] <= 0.0) return 0.0;
  const double threshold = std::exp(-1.0);
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    const double prev = corr[lag - 1] / corr[0];
    const double cur = corr[lag] / corr[0];
    if (cur < threshold) {
      return static_cast<double>(lag - 1) + (prev - threshold) / (prev - cur);
    }
  }
  return static_cast<double>(max_lag);
}

}  // namespace fibrelens
