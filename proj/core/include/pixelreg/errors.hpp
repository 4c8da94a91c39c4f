#pragma once

#include <stdexcept>

namespace pixelreg {

// Unreadable or malformed input files and datasets.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where training cannot continue.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pixelreg
