#pragma once

#include <stdexcept>
#include <string>

namespace heatlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: spec constraints, tail/moment margins, bad parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Tail indices leave less than the required margin on a moment condition.
class MomentMarginError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Argument outside the domain where an operation is meaningful
// (radius beyond L/2, cylinder leaving the box, wrong speed mode, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Shape or grid mismatch between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

// Matrix argument that is not symmetric positive definite.
class MatrixError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// A configured time or memory cap would be (or was) exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace heatlab
