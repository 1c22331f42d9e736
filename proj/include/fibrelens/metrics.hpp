#pragma once

#include <span>

#include "fibrelens/dataset.hpp"

namespace fibrelens {

enum class SsimForm {
  standard,  // (mx^2 + my^2 + C1)(sx^2 + sy^2 + C2) denominator
  literal,   // (mx^2 my^2 + C1)(sx^2 sy^2 + C2), kept for auditing against the printed formula
};

struct MetricParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  SsimForm form = SsimForm::standard;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

// Whole-image SSIM with population statistics.
double ssim(std::span<const float> x, std::span<const float> y, const MetricParams& p = {});
double ssim(const ImagePlane& x, const ImagePlane& y, const MetricParams& p = {});

// Pearson correlation; throws UndefinedMetricError when either input is constant.
double pcc(std::span<const float> x, std::span<const float> y);
double pcc(const ImagePlane& x, const ImagePlane& y);

double mse(std::span<const float> x, std::span<const float> y);
double mse(const ImagePlane& x, const ImagePlane& y);

}  // namespace fibrelens
