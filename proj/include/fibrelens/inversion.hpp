#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fibrelens/complex_matrix.hpp"

namespace fibrelens {

// Which quantity the data term compares: |Wx| against target amplitudes, or
// |Wx|^2 against target intensities.
enum class LossDomain { amplitude, intensity };

struct TrainConfig {
  double lambda = 0.03;
  double lr = 1e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 850;
  double init_bound = 0.002;
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 2;
  double plateau_threshold = 1e-4;
  std::optional<double> min_lr;  // defaults to lr / 1e3
  double stop_min_delta = 1e-4;
  std::size_t stop_patience = 8;
  std::uint64_t rng_seed = 0;
  LossDomain loss_domain = LossDomain::amplitude;
  std::size_t threads = 1;
  std::size_t keep_checkpoints = 0;  // 0 keeps every epoch

  double resolved_min_lr() const { return min_lr.value_or(lr / 1e3); }

  // Throws ArgumentError on an invalid configuration.
  void validate() const;
};

// A single dense complex layer mapping in_dim² speckle amplitudes to out_dim²
// image amplitudes.
class InverseModel {
 public:
  InverseModel() = default;
  InverseModel(std::size_t out_dim, std::size_t in_dim, ComplexMatrix weights);

  std::size_t out_dim() const noexcept { return out_dim_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t output_size() const noexcept { return out_dim_ * out_dim_; }
  std::size_t input_size() const noexcept { return in_dim_ * in_dim_; }

  const ComplexMatrix& weights() const noexcept { return weights_; }
  ComplexMatrix& weights() noexcept { return weights_; }

  friend bool operator==(const InverseModel&, const InverseModel&) = default;

 private:
  std::size_t out_dim_ = 0;
  std::size_t in_dim_ = 0;
  ComplexMatrix weights_;
};

// One training example: speckle amplitudes x and target image amplitudes t.
struct Example {
  std::span<const float> input;
  std::span<const float> target;
};

struct Gradient {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> re;  // d zeta / d Re(w), row-major
  std::vector<double> im;  // d zeta / d Im(w)
};

// Guard on the modulus in the amplitude-loss gradient.
inline constexpr double kModulusEpsilon = 1e-12;

InverseModel init_model(std::size_t out_dim, std::size_t in_dim, const TrainConfig& cfg);

// Element-wise modulus |Wx|.
std::vector<double> forward(const InverseModel& model, std::span<const float> x);

// zeta = mean over batch and pixels of the squared data error + lambda * sum |w|^2.
double loss(const InverseModel& model, std::span<const Example> batch, double lambda,
            LossDomain domain = LossDomain::amplitude);

// Mean squared data error only, without the regulariser.
double data_loss(const InverseModel& model, std::span<const Example> batch,
                 LossDomain domain = LossDomain::amplitude, std::size_t threads = 1);

Gradient gradient(const InverseModel& model, std::span<const Example> batch, double lambda,
                  LossDomain domain = LossDomain::amplitude);

// w <- w - lr * grad on real and imaginary parts.
void sgd_step(InverseModel& model, const Gradient& grad, double lr);

// Fused gradient + update on one mini-batch. Returns zeta at the weights
// before the update. Rows of W are processed in fixed blocks, so the result
// does not depend on the thread count.
double train_step(InverseModel& model, std::span<const Example> batch, double lambda, double lr,
                  LossDomain domain = LossDomain::amplitude, std::size_t threads = 1);

}  // namespace fibrelens
