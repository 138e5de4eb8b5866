#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdpass {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Arity mismatch between points, fields, or matrices.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A computation asked for more derivatives than the jets carry.
class JetOrderError : public Error {
public:
  JetOrderError(int requested, int available)
      : Error("jet order insufficient: requested " + std::to_string(requested) +
              ", available " + std::to_string(available)),
        requested_(requested), available_(available) {}

  int requested() const noexcept { return requested_; }
  int available() const noexcept { return available_; }

private:
  int requested_;
  int available_;
};

/// Adaptive integration could not reach the end of the interval.
class IntegratorError : public Error {
public:
  IntegratorError(const std::string& what, double last_time, std::vector<double> last_state)
      : Error(what), last_time_(last_time), last_state_(std::move(last_state)) {}

  double last_time() const noexcept { return last_time_; }
  const std::vector<double>& last_state() const noexcept { return last_state_; }

private:
  double last_time_;
  std::vector<double> last_state_;
};

/// A scalar root solve did not meet its residual tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double best_point, double best_residual)
      : Error(what + " (best residual " + std::to_string(best_residual) + ")"),
        best_point_(best_point), best_residual_(best_residual) {}

  double best_point() const noexcept { return best_point_; }
  double best_residual() const noexcept { return best_residual_; }

private:
  double best_point_;
  double best_residual_;
};

class QuadratureError : public Error {
public:
  QuadratureError(const std::string& what, double achieved_residual)
      : Error(what + " (achieved residual " + std::to_string(achieved_residual) + ")"),
        achieved_residual_(achieved_residual) {}

  double achieved_residual() const noexcept { return achieved_residual_; }

private:
  double achieved_residual_;
};

/// Matrix inversion rejected because the system is (numerically) singular.
class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, double condition)
      : Error(what + " (condition estimate " + std::to_string(condition) + ")"),
        condition_(condition) {}

  double condition() const noexcept { return condition_; }

private:
  double condition_;
};

}  // namespace sdpass
