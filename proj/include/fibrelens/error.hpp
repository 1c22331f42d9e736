#pragma once

#include <stdexcept>
#include <string>

namespace fibrelens {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller passed arguments that violate an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A file was readable but its contents do not match the expected layout.
class FormatError : public Error {
 public:
  enum class Kind { corrupt_header, truncated, unknown_version, dimension_mismatch };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Non-finite values appeared during a numerical computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A metric has no defined value for its inputs (e.g. correlation with a constant image).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

const char* to_string(FormatError::Kind kind) noexcept;

}  // namespace fibrelens
