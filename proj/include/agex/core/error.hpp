#pragma once

#include <stdexcept>
#include <string>

namespace agex {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Image or tensor dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (bad splits, missing resolution, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Request that contradicts persisted state, e.g. a duplicate submission.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Malformed input payload.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace agex
