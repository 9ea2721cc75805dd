#pragma once

// Closed-form elastic consistency constants, the convergence theorems'
// constant learning rates with their preconditions, and the theorems'
// right-hand-side bounds. These are the oracle side of the bound checks.

#include "elastic/objectives.hpp"
#include "elastic/state.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace elastic {

/// A theorem's precondition on T (or c) does not hold.
class PreconditionError : public std::domain_error {
 public:
  PreconditionError(const std::string& what, long required_min_T)
      : std::domain_error(what), required_min_T_(required_min_T) {}

  /// Smallest admissible T, or -1 when no T can satisfy the precondition.
  long required_min_T() const noexcept { return required_min_T_; }

 private:
  long required_min_T_;
};

struct TheoryBound {
  Scheme scheme = Scheme::exact;
  std::optional<double> B;  // nullopt: no closed form, measure empirically
  std::string provenance;
  // Inputs that entered the formula.
  double M = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
  int f = 0;
  int tau_max = 0;
  int p = 1;
  Eigen::Index d = 1;

  bool measured_only() const noexcept { return !B.has_value(); }
};

namespace detail {

inline double require_M(const ObjectiveConstants& k) {
  if (!(k.M2 >= 0.0)) throw ConfigError("bound_B: second-moment bound M^2 is missing");
  return std::sqrt(k.M2);
}

inline double require_sigma(const ObjectiveConstants& k) {
  if (!(k.sigma2 >= 0.0)) throw ConfigError("bound_B: variance bound sigma^2 is missing");
  return std::sqrt(k.sigma2);
}

}  // namespace detail

inline TheoryBound bound_B(const RelaxationConfig& scheme, const ObjectiveConstants& consts, int p, Eigen::Index d) {
  if (p < 1) throw ConfigError("bound_B: p must be >= 1");
  if (d < 1) throw ConfigError("bound_B: d must be >= 1");

  TheoryBound out;
  out.scheme = scheme.scheme;
  out.f = scheme.f;
  out.tau_max = scheme.tau_max;
  out.p = p;
  out.d = d;
  const double pd = static_cast<double>(p);

  switch (scheme.scheme) {
    case Scheme::exact:
      out.B = 0.0;
      out.provenance = "perfect consistency";
      break;
    case Scheme::shared_mem:
      out.M = detail::require_M(consts);
      out.B = std::sqrt(static_cast<double>(d)) * scheme.tau_max * out.M;
      out.provenance = "shared memory, tau_max-bounded asynchrony: sqrt(d) tau_max M";
      break;
    case Scheme::async_mp:
      out.M = detail::require_M(consts);
      out.B = (pd - 1.0) * scheme.tau_max * out.M / pd;
      out.provenance = "message passing, tau_max-bounded asynchrony: (p-1) tau_max M / p";
      break;
    case Scheme::crash_m2:
    case Scheme::omission:
      out.M = detail::require_M(consts);
      out.B = out.M * scheme.f / pd;
      out.provenance = "synchronous, f crash or message-omission faults: M f / p";
      break;
    case Scheme::crash_var:
      out.sigma = detail::require_sigma(consts);
      out.B = 3.0 * scheme.f * out.sigma / pd;
      out.provenance = "crash faults with own-gradient substitution: 3 f sigma / p (from 9 a^2 f^2 sigma^2 / p^2)";
      break;
    case Scheme::compress_ef: {
      out.M = detail::require_M(consts);
      const double gamma = scheme.compressor.build(d).gamma();
      out.gamma = gamma;
      out.B = std::sqrt((2.0 - gamma) * gamma / std::pow(1.0 - gamma, 3)) * out.M;
      out.provenance = "compression with error feedback: sqrt((2-g) g / (1-g)^3) M";
      break;
    }
    case Scheme::elastic_var:
      out.sigma = detail::require_sigma(consts);
      out.B = 3.0 * out.sigma;
      out.provenance = "variance-bounded elastic scheduler: 3 sigma (from 9 sigma^2 a^2)";
      break;
    case Scheme::adversarial:
      out.B = scheme.b_adv;
      out.provenance = "adversarial oracle offset";
      break;
    case Scheme::elastic_norm:
      out.B.reset();
      out.provenance = "norm-bounded elastic scheduler: O(M), measured only";
      break;
  }
  return out;
}

/// The closed-form B, or a ConfigError for measured-only schemes.
inline double require_closed_form(const TheoryBound& bound) {
  if (!bound.B) {
    throw ConfigError("no closed-form consistency constant for scheme " + std::string(to_string(bound.scheme)));
  }
  return *bound.B;
}

namespace detail {

inline long ceil_to_long(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }

inline void require_T(bool ok, const char* theorem, double min_T) {
  if (!ok) {
    throw PreconditionError(std::string(theorem) + " requires T >= " + std::to_string(ceil_to_long(min_T)),
                            ceil_to_long(min_T));
  }
}

inline void require_strong_convexity(const ObjectiveConstants& k, const char* theorem) {
  if (!(k.c > 0.0)) throw PreconditionError(std::string(theorem) + " requires a strongly convex objective (c > 0)", -1);
}

}  // namespace detail

/// Smallest T for which the theorem's schedule is admissible.
inline double min_iterations(Theorem th, int p, const ObjectiveConstants& k) {
  const double L2 = k.L * k.L;
  switch (th) {
    case Theorem::T1: return 36.0 * L2;
    case Theorem::T2: return 64.0 * L2 * p;
    case Theorem::T3: return 144.0 * L2 / (k.c * k.c);
    case Theorem::T4: return 256.0 * L2 * p / (k.c * k.c);
  }
  return 0.0;
}

/// Constant learning rate of the named theorem. Logarithms are natural.
inline double lr_schedule(Theorem th, long T, int p, const ObjectiveConstants& k) {
  if (T < 1) throw ConfigError("lr_schedule: T must be >= 1");
  if (p < 1) throw ConfigError("lr_schedule: p must be >= 1");
  const double Td = static_cast<double>(T);
  const double pd = static_cast<double>(p);
  switch (th) {
    case Theorem::T1:
      detail::require_T(Td >= min_iterations(th, p, k), "T1", min_iterations(th, p, k));
      return 1.0 / std::sqrt(Td);
    case Theorem::T2:
      detail::require_T(Td >= min_iterations(th, p, k), "T2", min_iterations(th, p, k));
      return std::sqrt(pd) / std::sqrt(Td);
    case Theorem::T3:
      detail::require_strong_convexity(k, "T3");
      detail::require_T(Td >= min_iterations(th, p, k), "T3", min_iterations(th, p, k));
      return 2.0 * std::log(Td) / (k.c * Td);
    case Theorem::T4:
      detail::require_strong_convexity(k, "T4");
      detail::require_T(Td >= min_iterations(th, p, k), "T4", min_iterations(th, p, k));
      return 2.0 * (std::log(Td) + std::log(pd)) / (k.c * Td);
  }
  return 0.0;
}

/// Initial-condition term of a theorem: f(x_0) - f* for T1/T2, ||x_0 - x*||^2
/// for T3/T4.
struct InitialGap {
  enum class Kind { value_gap, distance2 };
  Kind kind = Kind::value_gap;
  double value = 0.0;

  static InitialGap value_gap(double v) { return {Kind::value_gap, v}; }
  static InitialGap distance2(double v) { return {Kind::distance2, v}; }
};

/// Four-term right-hand side of the named theorem.
inline double rhs_bound(Theorem th, long T, int p, const ObjectiveConstants& k, double B, InitialGap init) {
  lr_schedule(th, T, p, k);  // precondition check
  const bool wants_distance = th == Theorem::T3 || th == Theorem::T4;
  if (wants_distance != (init.kind == InitialGap::Kind::distance2)) {
    throw ConfigError(std::string("rhs_bound: ") + std::string(to_string(th)) +
                      (wants_distance ? " needs ||x0 - x*||^2" : " needs f(x0) - f*"));
  }
  if (!(k.sigma2 >= 0.0)) throw ConfigError("rhs_bound: variance bound sigma^2 is missing");

  const double Td = static_cast<double>(T);
  const double pd = static_cast<double>(p);
  const double L = k.L;
  const double L2 = L * L;
  const double B2 = B * B;
  const double s2 = k.sigma2;
  const double sqrtT = std::sqrt(Td);

  switch (th) {
    case Theorem::T1:
      return 4.0 * init.value / sqrtT + 2.0 * B2 * L2 / Td + 6.0 * L * s2 / sqrtT + 6.0 * L2 * L * B2 / (Td * sqrtT);
    case Theorem::T2: {
      const double sqrtTp = std::sqrt(Td * pd);
      return 8.0 * init.value / sqrtTp + 4.0 * B2 * L2 * pd / Td + 8.0 * L * s2 / sqrtTp +
             16.0 * L2 * L * B2 * pd * std::sqrt(pd) / (Td * sqrtT);
    }
    case Theorem::T3: {
      const double lg = std::log(Td);
      const double c4 = std::pow(k.c, 4);
      return init.value / Td + 16.0 * lg * lg * L2 * B2 / (c4 * Td * Td) + 12.0 * s2 * lg / Td +
             48.0 * lg * lg * lg * B2 * L2 / (c4 * Td * Td * Td);
    }
    case Theorem::T4: {
      const double lg = std::log(Td) + std::log(pd);
      const double c4 = std::pow(k.c, 4);
      return init.value / (Td * pd) + 16.0 * lg * lg * L2 * B2 / (c4 * Td * Td) + 12.0 * s2 * lg / (Td * pd) +
             48.0 * lg * lg * lg * B2 * L2 / (c4 * Td * Td * Td);
    }
  }
  return 0.0;
}

/// Resolves a learning-rate spec against the objective constants.
inline double resolve_alpha(const AlphaSpec& spec, long T, int p, const ObjectiveConstants* k) {
  if (spec.value) {
    if (!(*spec.value > 0.0) || !std::isfinite(*spec.value)) throw ConfigError("alpha must be a finite value > 0");
    return *spec.value;
  }
  if (!spec.theorem) throw ConfigError("alpha: neither a value nor a theorem schedule was given");
  if (k == nullptr) throw ConfigError("alpha: a theorem schedule needs objective constants");
  return lr_schedule(*spec.theorem, T, p, *k);
}

}  // namespace elastic
