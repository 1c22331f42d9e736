#include "fibrelens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fibrelens/error.hpp"

namespace fibrelens {

namespace {

struct Moments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 0.0;  // sums of squared deviations, not yet divided by n
  double var_y = 0.0;
  double cov = 0.0;
};

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ArgumentError("metric inputs differ in size: " + std::to_string(a) + " vs " +
                        std::to_string(b));
  }
}

void check_same_shape(const ImagePlane& x, const ImagePlane& y) {
  if (x.width() != y.width() || x.height() != y.height()) {
    throw ArgumentError("metric inputs differ in dimensions");
  }
}

Moments moments(std::span<const float> x, std::span<const float> y) {
  Moments m;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x;
    const double dy = y[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  return m;
}

}  // namespace

void MetricParams::validate() const {
  if (!(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0)) {
    throw ArgumentError("K1, K2 and L must be positive");
  }
}

double ssim(std::span<const float> x, std::span<const float> y, const MetricParams& p) {
  check_same_size(x.size(), y.size());
  if (x.size() < 2) throw ArgumentError("SSIM needs at least two pixels");
  p.validate();
  const Moments m = moments(x, y);
  const auto n = static_cast<double>(x.size());
  const double sx2 = m.var_x / n;
  const double sy2 = m.var_y / n;
  const double sxy = m.cov / n;
  const double c1 = p.c1();
  const double c2 = p.c2();
  const double num = (2.0 * m.mean_x * m.mean_y + c1) * (2.0 * sxy + c2);
  if (p.form == SsimForm::literal) {
    return num / ((m.mean_x * m.mean_x * m.mean_y * m.mean_y + c1) * (sx2 * sy2 + c2));
  }
  return num / ((m.mean_x * m.mean_x + m.mean_y * m.mean_y + c1) * (sx2 + sy2 + c2));
}

double ssim(const ImagePlane& x, const ImagePlane& y, const MetricParams& p) {
  check_same_shape(x, y);
  return ssim(x.values(), y.values(), p);
}

double pcc(std::span<const float> x, std::span<const float> y) {
  check_same_size(x.size(), y.size());
  if (x.empty()) throw ArgumentError("PCC of empty inputs");
  const Moments m = moments(x, y);
  const double denom = std::sqrt(m.var_x * m.var_y);
  if (!(denom > 0.0)) throw UndefinedMetricError("PCC undefined: constant input");
  // Rounding can push |r| a hair above one for affine pairs.
  return std::clamp(m.cov / denom, -1.0, 1.0);
}

double pcc(const ImagePlane& x, const ImagePlane& y) {
  check_same_shape(x, y);
  return pcc(x.values(), y.values());
}

double mse(std::span<const float> x, std::span<const float> y) {
  check_same_size(x.size(), y.size());
  if (x.empty()) throw ArgumentError("MSE of empty inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = double{x[i]} - double{y[i]};
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double mse(const ImagePlane& x, const ImagePlane& y) {
  check_same_shape(x, y);
  return mse(x.values(), y.values());
}

}  // namespace fibrelens
