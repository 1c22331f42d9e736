#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fibrelens {

using cfloat = std::complex<float>;

// Dense complex matrix stored row-major in single precision.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cfloat> entries);

  static ComplexMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }

  cfloat& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  cfloat operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<cfloat> row(std::size_t r) { return {entries_.data() + r * cols_, cols_}; }
  std::span<const cfloat> row(std::size_t r) const { return {entries_.data() + r * cols_, cols_}; }

  std::span<cfloat> entries() noexcept { return entries_; }
  std::span<const cfloat> entries() const noexcept { return entries_; }

  bool all_finite() const noexcept;

  // Sum of squared moduli of all entries.
  double squared_norm() const noexcept;

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cfloat> entries_;
};

}  // namespace fibrelens
