#include "fibrelens/complex_matrix.hpp"

#include <cmath>
#include <string>

#include "fibrelens/error.hpp"

namespace fibrelens {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), entries_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cfloat> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) {
    throw ArgumentError("complex matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                        " given " + std::to_string(entries_.size()) + " entries");
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

bool ComplexMatrix::all_finite() const noexcept {
  for (const auto& z : entries_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

double ComplexMatrix::squared_norm() const noexcept {
  double acc = 0.0;
  for (const auto& z : entries_) {
    const double re = z.real();
    const double im = z.imag();
    acc += re * re + im * im;
  }
  return acc;
}

}  // namespace fibrelens
