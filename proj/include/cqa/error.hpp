#pragma once

#include <stdexcept>
#include <string>

namespace cqa {

// Base for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or usage (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data, I/O failures, corrupt checkpoints (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Shape or dimension mismatch between tensors, models or checkpoints.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf or a failed numeric verification (exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cqa
