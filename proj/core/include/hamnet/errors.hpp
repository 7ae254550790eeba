#pragma once

#include <stdexcept>
#include <string>

namespace hamnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not line up for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, missing weights, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset or meta file violates the fixture schema.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or consumed non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hamnet
