#include "fibrelens/inversion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "fibrelens/error.hpp"
#include "fibrelens/random.hpp"

namespace fibrelens {

namespace {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kRowBlock = 32;
constexpr std::size_t kEvalChunk = 256;

struct BlockSums {
  double data = 0.0;
  double reg = 0.0;
};

enum class Pass { loss, gradient, update };

// Batch laid out column-wise: inputs (in x B) and targets (out x B).
struct BatchMatrices {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
};

BatchMatrices pack(const InverseModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw ArgumentError("batch is empty");
  const auto b = static_cast<long>(batch.size());
  BatchMatrices m{Eigen::MatrixXd(static_cast<long>(model.input_size()), b),
                  Eigen::MatrixXd(static_cast<long>(model.output_size()), b)};
  for (long k = 0; k < b; ++k) {
    const Example& ex = batch[static_cast<std::size_t>(k)];
    if (ex.input.size() != model.input_size() || ex.target.size() != model.output_size()) {
      throw ArgumentError("example dimensions (" + std::to_string(ex.input.size()) + " -> " +
                          std::to_string(ex.target.size()) + ") do not match model (" +
                          std::to_string(model.input_size()) + " -> " +
                          std::to_string(model.output_size()) + ")");
    }
    for (std::size_t j = 0; j < ex.input.size(); ++j) m.inputs(static_cast<long>(j), k) = ex.input[j];
    for (std::size_t i = 0; i < ex.target.size(); ++i) m.targets(static_cast<long>(i), k) = ex.target[i];
  }
  return m;
}

template <typename Fn>
void for_each_block(std::size_t blocks, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, blocks));
  if (threads == 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t b = t; b < blocks; b += threads) fn(b);
    });
  }
}

// Processes rows [r0, r1) of W for one batch. All per-row work is independent,
// so blocks may run concurrently.
BlockSums process_block(const ComplexMatrix& weights, std::size_t r0, std::size_t r1,
                        const BatchMatrices& batch, double lambda, LossDomain domain, Pass pass,
                        double lr, Gradient* grad, ComplexMatrix* updated) {
  const auto rows = static_cast<long>(r1 - r0);
  const auto cols = static_cast<long>(weights.cols());
  const long b = batch.inputs.cols();

  RowMatrixXd w_re(rows, cols);
  RowMatrixXd w_im(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const auto src = weights.row(r0 + static_cast<std::size_t>(r));
    for (long c = 0; c < cols; ++c) {
      w_re(r, c) = src[static_cast<std::size_t>(c)].real();
      w_im(r, c) = src[static_cast<std::size_t>(c)].imag();
    }
  }

  const Eigen::MatrixXd y_re = w_re * batch.inputs;
  const Eigen::MatrixXd y_im = w_im * batch.inputs;
  const auto targets = batch.targets.middleRows(static_cast<long>(r0), rows);

  BlockSums sums;
  sums.reg = w_re.squaredNorm() + w_im.squaredNorm();

  // coef(i, k) multiplies Re/Im(y) in d(error)/d(w); the common factor 2 is applied below.
  Eigen::MatrixXd coef(rows, b);
  for (long k = 0; k < b; ++k) {
    for (long i = 0; i < rows; ++i) {
      const double yr = y_re(i, k);
      const double yi = y_im(i, k);
      const double t = targets(i, k);
      if (domain == LossDomain::amplitude) {
        const double a = std::sqrt(yr * yr + yi * yi);
        const double diff = a - t;
        sums.data += diff * diff;
        coef(i, k) = diff / std::max(a, kModulusEpsilon);
      } else {
        const double diff = yr * yr + yi * yi - t * t;
        sums.data += diff * diff;
        coef(i, k) = 2.0 * diff;
      }
    }
  }
  if (pass == Pass::loss) return sums;

  const double scale = 2.0 / static_cast<double>(static_cast<std::size_t>(b) * weights.rows());
  RowMatrixXd g_re = scale * (coef.cwiseProduct(y_re) * batch.inputs.transpose());
  RowMatrixXd g_im = scale * (coef.cwiseProduct(y_im) * batch.inputs.transpose());
  g_re += (2.0 * lambda) * w_re;
  g_im += (2.0 * lambda) * w_im;

  if (pass == Pass::gradient) {
    for (long r = 0; r < rows; ++r) {
      const std::size_t offset = (r0 + static_cast<std::size_t>(r)) * weights.cols();
      for (long c = 0; c < cols; ++c) {
        grad->re[offset + static_cast<std::size_t>(c)] = g_re(r, c);
        grad->im[offset + static_cast<std::size_t>(c)] = g_im(r, c);
      }
    }
    return sums;
  }

  for (long r = 0; r < rows; ++r) {
    auto dst = updated->row(r0 + static_cast<std::size_t>(r));
    for (long c = 0; c < cols; ++c) {
      dst[static_cast<std::size_t>(c)] =
          cfloat(static_cast<float>(w_re(r, c) - lr * g_re(r, c)),
                 static_cast<float>(w_im(r, c) - lr * g_im(r, c)));
    }
  }
  return sums;
}

struct PassResult {
  double data_sum = 0.0;
  double reg_sum = 0.0;
};

// `updated` may alias `weights`: each block copies its rows before writing them back.
PassResult run_pass(const ComplexMatrix& weights, const BatchMatrices& batch, double lambda,
                    LossDomain domain, Pass pass, double lr, Gradient* grad,
                    ComplexMatrix* updated, std::size_t threads) {
  const std::size_t blocks = (weights.rows() + kRowBlock - 1) / kRowBlock;
  std::vector<BlockSums> partial(blocks);
  for_each_block(blocks, threads, [&](std::size_t blk) {
    const std::size_t r0 = blk * kRowBlock;
    const std::size_t r1 = std::min(weights.rows(), r0 + kRowBlock);
    partial[blk] = process_block(weights, r0, r1, batch, lambda, domain, pass, lr, grad, updated);
  });
  PassResult total;
  for (const auto& p : partial) {
    total.data_sum += p.data;
    total.reg_sum += p.reg;
  }
  return total;
}

double zeta(const PassResult& r, std::size_t batch, std::size_t pixels, double lambda) {
  return r.data_sum / static_cast<double>(batch * pixels) + lambda * r.reg_sum;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be positive");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be nonnegative");
  };
  nonnegative(lambda, "lambda");
  positive(lr, "lr");
  positive(init_bound, "init_bound");
  positive(resolved_min_lr(), "min_lr");
  nonnegative(plateau_threshold, "plateau_threshold");
  nonnegative(stop_min_delta, "stop_min_delta");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ArgumentError("plateau_factor must lie in (0, 1)");
  }
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (plateau_patience < 1 || stop_patience < 1) throw ArgumentError("patience values must be at least 1");
}

InverseModel::InverseModel(std::size_t out_dim, std::size_t in_dim, ComplexMatrix weights)
    : out_dim_(out_dim), in_dim_(in_dim), weights_(std::move(weights)) {
  if (weights_.rows() != out_dim_ * out_dim_ || weights_.cols() != in_dim_ * in_dim_) {
    throw ArgumentError("weight matrix " + std::to_string(weights_.rows()) + "x" +
                        std::to_string(weights_.cols()) + " does not match dims " +
                        std::to_string(out_dim_) + "^2 x " + std::to_string(in_dim_) + "^2");
  }
  if (!weights_.all_finite()) throw NumericError("weight matrix has non-finite entries");
}

InverseModel init_model(std::size_t out_dim, std::size_t in_dim, const TrainConfig& cfg) {
  if (out_dim == 0 || in_dim == 0) throw ArgumentError("model dimensions must be positive");
  if (!(cfg.init_bound > 0.0)) throw ArgumentError("init_bound must be positive");
  Rng rng(cfg.rng_seed);
  ComplexMatrix w(out_dim * out_dim, in_dim * in_dim);
  const double bound = cfg.init_bound;
  for (auto& z : w.entries()) {
    const double re = rng.uniform(-bound, bound);
    const double im = rng.uniform(-bound, bound);
    z = cfloat(static_cast<float>(re), static_cast<float>(im));
  }
  return InverseModel(out_dim, in_dim, std::move(w));
}

std::vector<double> forward(const InverseModel& model, std::span<const float> x) {
  if (x.size() != model.input_size()) {
    throw ArgumentError("input has " + std::to_string(x.size()) + " amplitudes, model expects " +
                        std::to_string(model.input_size()));
  }
  const ComplexMatrix& w = model.weights();
  std::vector<double> out(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    double re = 0.0;
    double im = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      re += double{row[j].real()} * x[j];
      im += double{row[j].imag()} * x[j];
    }
    out[i] = std::sqrt(re * re + im * im);
  }
  return out;
}

double loss(const InverseModel& model, std::span<const Example> batch, double lambda,
            LossDomain domain) {
  const BatchMatrices m = pack(model, batch);
  const PassResult r =
      run_pass(model.weights(), m, lambda, domain, Pass::loss, 0.0, nullptr, nullptr, 1);
  return zeta(r, batch.size(), model.output_size(), lambda);
}

double data_loss(const InverseModel& model, std::span<const Example> batch, LossDomain domain,
                 std::size_t threads) {
  if (batch.empty()) throw ArgumentError("batch is empty");
  double sum = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += kEvalChunk) {
    const auto chunk = batch.subspan(start, std::min(kEvalChunk, batch.size() - start));
    const BatchMatrices m = pack(model, chunk);
    sum += run_pass(model.weights(), m, 0.0, domain, Pass::loss, 0.0, nullptr, nullptr, threads).data_sum;
  }
  return sum / static_cast<double>(batch.size() * model.output_size());
}

Gradient gradient(const InverseModel& model, std::span<const Example> batch, double lambda,
                  LossDomain domain) {
  const BatchMatrices m = pack(model, batch);
  const ComplexMatrix& w = model.weights();
  Gradient g{w.rows(), w.cols(), std::vector<double>(w.size()), std::vector<double>(w.size())};
  run_pass(w, m, lambda, domain, Pass::gradient, 0.0, &g, nullptr, 1);
  return g;
}

void sgd_step(InverseModel& model, const Gradient& grad, double lr) {
  ComplexMatrix& w = model.weights();
  if (grad.rows != w.rows() || grad.cols != w.cols()) {
    throw ArgumentError("gradient shape does not match the model");
  }
  auto entries = w.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    entries[k] = cfloat(static_cast<float>(double{entries[k].real()} - lr * grad.re[k]),
                        static_cast<float>(double{entries[k].imag()} - lr * grad.im[k]));
  }
}

double train_step(InverseModel& model, std::span<const Example> batch, double lambda, double lr,
                  LossDomain domain, std::size_t threads) {
  const BatchMatrices m = pack(model, batch);
  const PassResult r =
      run_pass(model.weights(), m, lambda, domain, Pass::update, lr, nullptr, &model.weights(), threads);
  return zeta(r, batch.size(), model.output_size(), lambda);
}

}  // namespace fibrelens
