#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace panelci {

/// Input violates a documented precondition or invariant (CLI exit status 1).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed (CLI exit status 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The simplex QP hit its iteration cap. Carries the best feasible iterate.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best, double kkt_residual)
      : NumericalError(what), best_(std::move(best)), kkt_residual_(kkt_residual) {}

  const Eigen::VectorXd& best_iterate() const { return best_; }
  double kkt_residual() const { return kkt_residual_; }

 private:
  Eigen::VectorXd best_;
  double kkt_residual_;
};

}  // namespace panelci
