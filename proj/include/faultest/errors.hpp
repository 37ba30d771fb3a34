#pragma once

#include <stdexcept>
#include <string>

namespace faultest {

/// Base class of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& names)
      : Error("dimension mismatch: " + names), names_(names) {}
  const std::string& names() const { return names_; }

 private:
  std::string names_;
};

/// rank(D_f) equals the number of outputs; the observer LMI cannot be feasible.
class SensorFaultRankViolation : public Error {
 public:
  SensorFaultRankViolation(int rank, int outputs)
      : Error("rank(D_f) = " + std::to_string(rank) + " equals the number of outputs m = " +
              std::to_string(outputs)) {}
};

class KindArgumentMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidOrder : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public Error {
 public:
  IllConditioned(double cond)
      : Error("P is ill-conditioned (cond2 = " + std::to_string(cond) + ")"), cond_(cond) {}
  double condition() const { return cond_; }

 private:
  double cond_;
};

class IdentityViolation : public Error {
 public:
  IdentityViolation(const std::string& which, double residual)
      : Error("filter identity violated: " + which + " (relative residual " +
              std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class NonFiniteState : public Error {
 public:
  explicit NonFiniteState(double t)
      : Error("non-finite state at t = " + std::to_string(t)), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NoiseNotZero : public Error {
 public:
  using Error::Error;
};

class DisturbanceNotZero : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace faultest
