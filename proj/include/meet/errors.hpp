#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace meet {

namespace detail {

/// Scientific formatting for diagnostics; std::to_string flattens small
/// residuals to "0.000000".
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace detail

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller-supplied parameter violates a precondition (d <= 0, n < 2, ...).
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not match the operator.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Graph cannot drive a random walk (isolated vertex, ...).
class DegenerateGraphError : public Error {
 public:
  using Error::Error;
};

/// Transition matrix is reducible; no unique stationary distribution.
class NoUniqueStationaryError : public Error {
 public:
  using Error::Error;
};

/// The killed pair system is singular: some pair of states never meets.
class InfiniteMeetingTimeError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel exhausted its budget. Carries the final residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : Error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_ = 0.0;
};

/// Requested a quantity the given decomposition does not hold.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Closed-form and numeric routes disagree beyond tolerance.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

/// Dense materialization refused above the configured size threshold.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Perturbed vector rotated past 90 degrees; rotation unrecoverable.
class RecoveryError : public Error {
 public:
  using Error::Error;
};

}  // namespace meet
