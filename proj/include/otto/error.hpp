#pragma once

#include <stdexcept>
#include <string>

namespace otto {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A density matrix left the Hermitian / unit-trace / PSD set.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Time stepping produced an invalid state; `time()` is where it was detected.
class PropagationDiverged : public Error {
 public:
  PropagationDiverged(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class RegimeError : public Error {
 public:
  using Error::Error;
};

class StatisticsError : public Error {
 public:
  using Error::Error;
};

class UndefinedCoherence : public Error {
 public:
  using Error::Error;
};

/// Limit cycle did not close within tolerance.
class NotConverged : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation; `field()` is a dotted path such as `engine.kappa_b`.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace otto
