#pragma once

#include <stdexcept>
#include <string>

namespace stan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV, windows, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A configuration violates one of its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be parsed or does not match its declared config.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace stan
