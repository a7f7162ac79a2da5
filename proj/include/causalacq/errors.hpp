#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace causalacq {

/// Arguments outside an operation's domain (bad sizes, infeasible counts, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical invariant that should hold by construction was violated.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Acquisition evaluated where its closed form is undefined
/// (e.g. inverse-gamma moments with shape <= 2).
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The ball-constrained optimizer met a non-finite value or gradient.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, Eigen::VectorXd iterate)
      : std::runtime_error(what), iterate_(std::move(iterate)) {}

  const Eigen::VectorXd& iterate() const noexcept { return iterate_; }

 private:
  Eigen::VectorXd iterate_;
};

}  // namespace causalacq
