#pragma once

#include <stdexcept>
#include <string>

namespace genad {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix extents do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data could not be ingested (CSV syntax, spacing, coverage, length).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A synthetic-data specification is malformed.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// An anomaly injection plan cannot be realized on the given frame.
class PlanError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint file is unreadable, of the wrong version, or corrupted.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace genad
