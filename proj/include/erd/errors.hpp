#pragma once

#include <stdexcept>
#include <string>

namespace erd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not conform for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unsupported version or malformed manifest.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Missing or truncated files, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace erd
