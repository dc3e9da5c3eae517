#pragma once

#include <stdexcept>
#include <string>

namespace qkrf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (non-PD form,
/// non-Hermitian matrix, non-admissible potential, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Shape or level mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Operation not provided by the chosen backend (e.g. radial PDE
/// operations on a discrete model).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or malformed serialized input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qkrf
