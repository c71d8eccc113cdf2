#pragma once

#include <stdexcept>
#include <string>

namespace pstnet {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file exists but its content does not match the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Values that parse fine but violate a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad or missing configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or activation during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Data required by the selected mode is absent (e.g. stored flow).
class MissingDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace pstnet
