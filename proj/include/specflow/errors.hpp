#pragma once

#include <stdexcept>
#include <string>

namespace specflow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vectors or operators of incompatible dimensions were combined.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An operation required an invertible operator but the invertibility
/// margin fell below the threshold.
class NotInvertible : public Error {
 public:
  using Error::Error;
};

/// A requested spectral shift lies within the margin of an eigenvalue.
class ShiftOnSpectrum : public Error {
 public:
  using Error::Error;
};

/// No point of the requested window is far enough from the spectrum.
class WindowTooTight : public Error {
 public:
  using Error::Error;
};

class EndpointNotInvertible : public NotInvertible {
 public:
  using NotInvertible::NotInvertible;
};

/// The sampled tail of a half-infinite or line path has not settled close
/// enough to the declared asymptotic operator.
class TailNotSettled : public Error {
 public:
  using Error::Error;
};

class MismatchAtJunction : public Error {
 public:
  using Error::Error;
};

class JunctionNotInvertible : public NotInvertible {
 public:
  using NotInvertible::NotInvertible;
};

/// The perturbation is too large for the Neumann-series inverse to exist.
class PerturbationTooLarge : public Error {
 public:
  using Error::Error;
};

/// A scenario or other external input failed validation. Carries the path
/// of the offending field.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace specflow
