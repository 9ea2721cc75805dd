#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace elastic {

/// Dense real vector of fixed dimension d. Houses parameters, views, gradients
/// and error accumulators.
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid user-supplied configuration. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand dimensions disagree.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulator or scheme invariant was violated during a run. This indicates a
/// bug in a scheme (or an infeasible explicit schedule), never a user typo.
/// The CLI maps this to exit code 3.
class InvariantViolation : public std::logic_error {
 public:
  InvariantViolation(std::string invariant, const std::string& detail)
      : std::logic_error(invariant + ": " + detail), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

inline void require_dimension(const ParamVector& x, Eigen::Index d, const char* what) {
  if (x.size() != d) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(d) +
                            ", got " + std::to_string(x.size()));
  }
}

inline bool all_finite(const ParamVector& x) { return x.allFinite(); }

}  // namespace elastic
