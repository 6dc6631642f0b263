#pragma once

#include <stdexcept>
#include <string>

namespace atomsim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or model parameter is outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Grids that must share a shape do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Configuration parse or validation failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A fit could not produce a usable result.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace atomsim
