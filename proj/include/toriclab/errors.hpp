#pragma once

#include <stdexcept>
#include <string>

namespace toriclab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad index, dimension mismatch, unparsable data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Polytope fails a structural check (unbounded, empty interior, degenerate vertex).
class InvalidPolytope : public Error {
 public:
  using Error::Error;
};

/// Point lies outside the closed polytope.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Gradient or Hessian requested on the boundary where ℓ_j = 0.
class BoundarySingularity : public Error {
 public:
  using Error::Error;
};

/// Operation needs a convex potential and got a non-convex one.
class ConvexityError : public Error {
 public:
  using Error::Error;
};

/// det H <= 0 where the regularity function needs a positive determinant.
class RegularityError : public Error {
 public:
  using Error::Error;
};

/// Iterative method did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Operation-level precondition failed (label not interior, grid too small, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Metric block is singular (det H = 0).
class SingularMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace toriclab
