#pragma once

// What the kernel needs from an objective. `Objective` models it; tests plug
// in hand-built oracles (constant or one-hot gradients) for exact traces.

#include "elastic/types.hpp"

#include <concepts>
#include <optional>

namespace elastic {

template <class O>
concept GradientOracle = requires(const O& o, Eigen::Index i, const ParamVector& x, ParamVector& out) {
  { o.dimension() } -> std::convertible_to<Eigen::Index>;
  { o.sample_count() } -> std::convertible_to<Eigen::Index>;
  o.sample_gradient(i, x, out);
  o.full_gradient(x, out);
  { o.eval(x) } -> std::convertible_to<double>;
  { o.optimum() } -> std::convertible_to<const std::optional<ParamVector>&>;
};

template <class O>
concept HasConstants = requires(const O& o) {
  { o.constants().L } -> std::convertible_to<double>;
};

template <class O>
concept HasRegion = requires(const O& o) {
  { o.region_center() } -> std::convertible_to<const ParamVector&>;
  { o.constants().region_radius } -> std::convertible_to<double>;
};

}  // namespace elastic
