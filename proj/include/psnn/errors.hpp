#pragma once

#include <stdexcept>
#include <string>

namespace psnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration, detected before any work is done.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (IDX container, checkpoint, manifest).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Overflow / non-finite values produced during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A closed-form expression produced a value it can never take.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A simulated physical quantity left its admissible range.
class PhysicsViolationError : public Error {
 public:
  using Error::Error;
};

/// A caller handed in data that was not produced under the expected contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace psnn
