#pragma once

#include <stdexcept>
#include <string>

namespace locgibbs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad sizes, out-of-range parameters, mismatched bases.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The truncated Fock space would exceed the configured dimension cap.
class DimensionCapExceeded : public Error {
 public:
  using Error::Error;
};

/// r0 does not dominate the computed stability constant, or no positive
/// lower-bound constant exists on some sector.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// A root-solve target lies outside the range attainable on the truncation.
class RangeError : public Error {
 public:
  RangeError(const std::string& what, double lower, double upper)
      : Error(what), lower_(lower), upper_(upper) {}

  double lower() const { return lower_; }
  double upper() const { return upper_; }

 private:
  double lower_;
  double upper_;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace locgibbs
