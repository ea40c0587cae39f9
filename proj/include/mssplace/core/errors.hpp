#pragma once

#include <stdexcept>
#include <string>

namespace mss {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration value or an invalid operation/shape combination.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or missing input data (files, manifests, payloads).
struct DataError : Error {
  using Error::Error;
};

// Shape/dimension contract violation between tensors.
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf or other numeric breakdown in a forward/backward pass.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace mss
