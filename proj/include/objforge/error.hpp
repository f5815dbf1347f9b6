#pragma once

#include <stdexcept>
#include <string>

namespace objforge {

// Base of every error the library throws. The CLI maps ValidationError
// subclasses to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input or configuration rejected before any work started.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DecodeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EmptyCorpusError : public ValidationError {
 public:
  EmptyCorpusError() : ValidationError("empty corpus") {}
  using ValidationError::ValidationError;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// The corpus does not contain enough structure for the requested sampling.
class InsufficientMaterial : public Error {
 public:
  using Error::Error;
};

}  // namespace objforge
