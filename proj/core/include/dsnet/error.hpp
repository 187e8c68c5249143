#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dsnet {

// Root of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Element count of a requested shape does not fit in size_t.
class SizeError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

// Reduction over an empty extent and similar.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition (non one-hot targets, stale cache).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Out-of-range operation parameter (rotation angle, blur sigma, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Non-finite loss or gradient during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsnet
