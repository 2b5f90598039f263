#pragma once

#include <stdexcept>
#include <string>

namespace fsvc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad magic, version or structure in an on-disk file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter or longer than its header announces.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented invariant (non-finite values, overlapping splits, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Zero-norm vectors where a direction is required.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Not enough classes or videos to satisfy a sampling request.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A class in 0..n_way-1 has no support sample.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Pretraining data shares classes with the benchmark.
class LeakageError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsvc
