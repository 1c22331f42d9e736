#include "fibrelens/error.hpp"

namespace fibrelens {

const char* to_string(FormatError::Kind kind) noexcept {
  switch (kind) {
    case FormatError::Kind::corrupt_header:
      return "corrupt header";
    case FormatError::Kind::truncated:
      return "truncated payload";
    case FormatError::Kind::unknown_version:
      return "unknown version";
    case FormatError::Kind::dimension_mismatch:
      return "dimension mismatch";
  }
  return "format error";
}

}  // namespace fibrelens
