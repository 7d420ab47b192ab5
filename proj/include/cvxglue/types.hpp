#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cvxglue {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument (nonpositive width, empty piece list, dimension mismatch...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Query point outside the domain of an expression or oracle.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested derivative order exceeds what the node can deliver.
class OrderError : public Error {
 public:
  using Error::Error;
};

/// A sample or piece budget was exhausted before reaching the requested accuracy.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// An inner minimization did not converge (or the objective is unbounded below).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A sampled check found a violated contract (e.g. a gluing stage piece).
class ContractViolation : public Error {
 public:
  ContractViolation(const std::string& what, int stage)
      : Error(what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Malformed JSON document or unknown schema field.
class SchemaError : public Error {
 public:
  using Error::Error;
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace cvxglue
