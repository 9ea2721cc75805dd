#pragma once

// Hand-built gradient oracles for exact traces: per-sample gradients are
// fixed columns that do not depend on x.

#include "elastic/types.hpp"

#include <optional>
#include <vector>

namespace testing_oracles {

using elastic::Matrix;
using elastic::ParamVector;

struct TableOracle {
  Matrix columns;  // d x m
  std::optional<ParamVector> opt;
  mutable std::vector<Eigen::Index> drawn;  // sample indices in call order
  bool record = false;

  Eigen::Index dimension() const { return columns.rows(); }
  Eigen::Index sample_count() const { return columns.cols(); }
  void sample_gradient(Eigen::Index i, const ParamVector&, ParamVector& out) const {
    if (record) drawn.push_back(i);
    out = columns.col(i);
  }
  void full_gradient(const ParamVector&, ParamVector& out) const { out = columns.rowwise().mean(); }
  double eval(const ParamVector& x) const { return columns.rowwise().mean().dot(x); }
  const std::optional<ParamVector>& optimum() const { return opt; }
};

/// Every sample's gradient is e_1.
inline TableOracle unit_oracle(Eigen::Index d) {
  TableOracle o;
  o.columns = Matrix::Zero(d, 1);
  o.columns(0, 0) = 1.0;
  return o;
}

/// m distinct random gradient columns.
inline TableOracle random_oracle(Eigen::Index d, Eigen::Index m, unsigned seed) {
  TableOracle o;
  std::srand(seed);
  o.columns = Matrix::Random(d, m);
  return o;
}

}  // namespace testing_oracles
