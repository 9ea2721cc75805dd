#pragma once

// Synthetic finite-sum objectives f(x) = (1/m) sum_i l(S_i, x) with exact
// per-sample gradient oracles and constants (L, c, sigma^2, M^2) that are known
// in closed form or measured by brute force over all m samples.

#include "elastic/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>

namespace elastic {

enum class ObjectiveKind { quadratic, logistic, cosine_quadratic };

inline std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::quadratic: return "quadratic";
    case ObjectiveKind::logistic: return "logistic";
    case ObjectiveKind::cosine_quadratic: return "cosine_quadratic";
  }
  return "unknown";
}

struct ObjectiveConstants {
  double L = 0.0;       // smoothness
  double c = 0.0;       // strong convexity, 0 when not strongly convex
  double sigma2 = std::numeric_limits<double>::quiet_NaN();  // per-sample gradient variance bound; NaN: unknown
  double M2 = std::numeric_limits<double>::quiet_NaN();      // per-sample second moment bound; NaN: unknown
  double f_star = 0.0;  // lower bound of f
  double region_radius = 0.0;  // ball around x* (or the origin) where sigma2, M2 hold
  bool estimated = false;      // L and c are bounds rather than exact values
};

/// f(x) = (1/m) sum_i 1/2 (x - b_i)^T A (x - b_i), optionally plus
/// amplitude * sum_k cos(frequency * x_k) for the non-convex variant.
struct QuadraticSpec {
  Eigen::Index d = 2;
  Eigen::Index m = 1;
  double c = 1.0;
  double L = 1.0;
  double spread = 0.0;  // dispersion of the b_i around their center
  std::uint64_t seed = 0;
  double center = 0.0;  // b_i are centered at center * (1,...,1)/sqrt(d)
  std::optional<double> region_radius;  // default max(1, 2 ||x*||), so the ball covers x_0 = 0
  double amplitude = 0.0;  // cosine bump, cosine_quadratic only
  double frequency = 1.0;
};

struct LogisticSpec {
  Eigen::Index d = 3;
  Eigen::Index m = 16;
  std::uint64_t seed = 0;
  double l2 = 0.0;
  double region_radius = 2.0;
};

class Objective {
 public:
  ObjectiveKind kind() const noexcept { return kind_; }
  Eigen::Index dimension() const noexcept { return d_; }
  Eigen::Index sample_count() const noexcept { return m_; }
  const ObjectiveConstants& constants() const noexcept { return constants_; }
  const std::optional<ParamVector>& optimum() const noexcept { return optimum_; }

  // Quadratic parts (quadratic, cosine_quadratic).
  const Matrix& hessian() const noexcept { return hessian_; }
  const Matrix& centers() const noexcept { return centers_; }  // d x m, column i is b_i
  const ParamVector& spectrum() const noexcept { return spectrum_; }
  double amplitude() const noexcept { return amplitude_; }
  double frequency() const noexcept { return frequency_; }

  // Logistic parts.
  const Matrix& features() const noexcept { return centers_; }  // d x m, column i is a_i
  const ParamVector& labels() const noexcept { return labels_; }
  double l2() const noexcept { return l2_; }

  double sample_loss(Eigen::Index i, const ParamVector& x) const {
    switch (kind_) {
      case ObjectiveKind::quadratic: {
        const ParamVector r = x - centers_.col(i);
        return 0.5 * r.dot(hessian_ * r);
      }
      case ObjectiveKind::cosine_quadratic: {
        const ParamVector r = x - centers_.col(i);
        return 0.5 * r.dot(hessian_ * r) + cosine_bump(x);
      }
      case ObjectiveKind::logistic: {
        const double z = -labels_[i] * centers_.col(i).dot(x);
        return softplus(z) + 0.5 * l2_ * x.squaredNorm();
      }
    }
    return 0.0;
  }

  /// Writes grad l(S_i, x) into `out` (pre-sized to d). No allocation for the
  /// quadratic kinds, which sit on the simulator's hot path.
  void sample_gradient(Eigen::Index i, const ParamVector& x, ParamVector& out) const {
    switch (kind_) {
      case ObjectiveKind::quadratic:
        out.noalias() = hessian_ * x;
        out -= hessian_centers_.col(i);
        return;
      case ObjectiveKind::cosine_quadratic:
        out.noalias() = hessian_ * x;
        out -= hessian_centers_.col(i);
        for (Eigen::Index k = 0; k < d_; ++k) out[k] -= amplitude_ * frequency_ * std::sin(frequency_ * x[k]);
        return;
      case ObjectiveKind::logistic: {
        const double y = labels_[i];
        const double z = -y * centers_.col(i).dot(x);
        out = (-y * sigmoid(z)) * centers_.col(i) + l2_ * x;
        return;
      }
    }
  }

  /// Mean of the per-sample losses. The quadratic kinds use the algebraically
  /// identical closed form 1/2 (x-b)^T A (x-b) + const.
  double eval(const ParamVector& x) const {
    switch (kind_) {
      case ObjectiveKind::quadratic:
      case ObjectiveKind::cosine_quadratic: {
        const ParamVector r = x - mean_center_;
        double v = 0.5 * r.dot(hessian_ * r) + spread_energy_;
        if (kind_ == ObjectiveKind::cosine_quadratic) v += cosine_bump(x);
        return v;
      }
      case ObjectiveKind::logistic: {
        double s = 0.0;
        for (Eigen::Index i = 0; i < m_; ++i) s += sample_loss(i, x);
        return s / static_cast<double>(m_);
      }
    }
    return 0.0;
  }

  void full_gradient(const ParamVector& x, ParamVector& out) const {
    switch (kind_) {
      case ObjectiveKind::quadratic:
        out.noalias() = hessian_ * x;
        out -= hessian_mean_center_;
        return;
      case ObjectiveKind::cosine_quadratic:
        out.noalias() = hessian_ * x;
        out -= hessian_mean_center_;
        for (Eigen::Index k = 0; k < d_; ++k) out[k] -= amplitude_ * frequency_ * std::sin(frequency_ * x[k]);
        return;
      case ObjectiveKind::logistic: {
        ParamVector g(d_);
        out.setZero(d_);
        for (Eigen::Index i = 0; i < m_; ++i) {
          sample_gradient(i, x, g);
          out += g;
        }
        out /= static_cast<double>(m_);
        return;
      }
    }
  }

  /// Exact variance (1/m) sum_i ||grad l_i(x) - grad f(x)||^2 over all samples.
  double gradient_variance(const ParamVector& x) const {
    ParamVector full(d_), g(d_);
    full_gradient(x, full);
    double s = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      sample_gradient(i, x, g);
      s += (g - full).squaredNorm();
    }
    return s / static_cast<double>(m_);
  }

  /// Exact second moment (1/m) sum_i ||grad l_i(x)||^2 over all samples.
  double gradient_second_moment(const ParamVector& x) const {
    ParamVector g(d_);
    double s = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      sample_gradient(i, x, g);
      s += g.squaredNorm();
    }
    return s / static_cast<double>(m_);
  }

  /// Center of the region on which sigma2 and M2 are declared.
  const ParamVector& region_center() const noexcept { return region_center_; }

  /// Direction of largest curvature, used as an extremal probe (quadratic kinds).
  const ParamVector& top_direction() const noexcept { return top_direction_; }

  void set_constants(const ObjectiveConstants& k) { constants_ = k; }

  friend Objective make_quadratic(const QuadraticSpec& spec);
  friend Objective make_cosine_quadratic(const QuadraticSpec& spec);
  friend Objective make_logistic(const LogisticSpec& spec);

 private:
  Objective() = default;

  double cosine_bump(const ParamVector& x) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < d_; ++k) s += std::cos(frequency_ * x[k]);
    return amplitude_ * s;
  }

  static double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
  static double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  ObjectiveKind kind_ = ObjectiveKind::quadratic;
  Eigen::Index d_ = 0;
  Eigen::Index m_ = 0;
  Matrix hessian_;
  Matrix centers_;
  Matrix hessian_centers_;  // A * b_i, column-wise
  ParamVector mean_center_;
  ParamVector hessian_mean_center_;
  ParamVector spectrum_;
  ParamVector top_direction_;
  ParamVector labels_;
  double spread_energy_ = 0.0;  // (1/m) sum_i 1/2 (b_i - b)^T A (b_i - b)
  double amplitude_ = 0.0;
  double frequency_ = 1.0;
  double l2_ = 0.0;
  std::optional<ParamVector> optimum_;
  ParamVector region_center_;
  ObjectiveConstants constants_;
};

/// Brute-force constants over a ball of radius `region_radius` around x* (or
/// the origin when x* is unknown). sigma2 and M2 are maxima over the probe
/// points of the exact all-sample variance and second moment. Quadratic kinds
/// add the two extremal points x* +- R * top_direction, where ||grad f|| peaks,
/// so their M2 is the exact supremum L^2 R^2 + sigma^2.
template <class Rng>
ObjectiveConstants measure_constants(const Objective& obj, double region_radius, int probes, Rng& rng) {
  if (probes < 1) throw ConfigError("measure_constants: probes must be >= 1");
  if (!(region_radius >= 0.0)) throw ConfigError("measure_constants: region_radius must be >= 0");

  const Eigen::Index d = obj.dimension();
  const ParamVector& center = obj.region_center();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ObjectiveConstants k = obj.constants();
  k.region_radius = region_radius;
  k.sigma2 = 0.0;
  k.M2 = 0.0;

  auto visit = [&](const ParamVector& x) {
    k.sigma2 = std::max(k.sigma2, obj.gradient_variance(x));
    k.M2 = std::max(k.M2, obj.gradient_second_moment(x));
  };

  visit(center);
  if (obj.kind() != ObjectiveKind::logistic && region_radius > 0.0) {
    visit(center + region_radius * obj.top_direction());
    visit(center - region_radius * obj.top_direction());
  }
  for (int n = 1; n < probes; ++n) {
    ParamVector dir(d);
    for (Eigen::Index j = 0; j < d; ++j) dir[j] = normal(rng);
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    const double r = region_radius * std::pow(unit(rng), 1.0 / static_cast<double>(d));
    visit(center + (r / norm) * dir);
  }
  return k;
}

namespace detail {

inline Matrix random_orthogonal(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(d, d);
}

}  // namespace detail

inline Objective make_quadratic(const QuadraticSpec& spec) {
  if (spec.d < 1) throw ConfigError("make_quadratic: d must be >= 1");
  if (spec.m < 1) throw ConfigError("make_quadratic: m must be >= 1");
  if (!(spec.c > 0.0)) throw ConfigError("make_quadratic: c must be > 0");
  if (spec.c > spec.L) throw ConfigError("make_quadratic: c must not exceed L");
  if (spec.d == 1 && spec.c != spec.L) throw ConfigError("make_quadratic: d = 1 requires c == L");
  if (!(spec.spread >= 0.0)) throw ConfigError("make_quadratic: spread must be >= 0");

  const Eigen::Index d = spec.d;
  const Eigen::Index m = spec.m;
  std::mt19937_64 rng(spec.seed);

  Objective obj;
  obj.kind_ = ObjectiveKind::quadratic;
  obj.d_ = d;
  obj.m_ = m;

  obj.spectrum_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    obj.spectrum_[j] = d == 1 ? spec.L : spec.c + (spec.L - spec.c) * static_cast<double>(j) / static_cast<double>(d - 1);
  }
  const Matrix q = detail::random_orthogonal(d, rng);
  Matrix a = q * obj.spectrum_.asDiagonal() * q.transpose();
  obj.hessian_ = 0.5 * (a + a.transpose());
  obj.top_direction_ = q.col(d - 1);

  std::normal_distribution<double> normal(0.0, 1.0);
  const ParamVector base = ParamVector::Constant(d, spec.center / std::sqrt(static_cast<double>(d)));
  obj.centers_.resize(d, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) obj.centers_(j, i) = base[j] + spec.spread * normal(rng);
  }
  obj.mean_center_ = obj.centers_.rowwise().mean();
  obj.hessian_centers_ = obj.hessian_ * obj.centers_;
  obj.hessian_mean_center_ = obj.hessian_ * obj.mean_center_;

  double energy = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const ParamVector r = obj.centers_.col(i) - obj.mean_center_;
    energy += 0.5 * r.dot(obj.hessian_ * r);
  }
  obj.spread_energy_ = energy / static_cast<double>(m);
  obj.optimum_ = obj.mean_center_;
  obj.region_center_ = obj.mean_center_;

  ObjectiveConstants k;
  k.L = spec.L;
  k.c = spec.c;
  k.f_star = obj.spread_energy_;
  k.estimated = false;
  obj.constants_ = k;

  const double radius = spec.region_radius.value_or(std::max(1.0, 2.0 * obj.mean_center_.norm()));
  std::mt19937_64 probe_rng(spec.seed ^ 0x5DEECE66DULL);
  obj.constants_ = measure_constants(obj, radius, 64, probe_rng);
  return obj;
}

/// Quadratic plus a per-coordinate cosine bump. Hessian is
/// A - amplitude * frequency^2 * diag(cos(frequency x_k)), so
/// L = lambda_max + amplitude * frequency^2 and the function is non-convex
/// whenever amplitude * frequency^2 > lambda_min.
inline Objective make_cosine_quadratic(const QuadraticSpec& spec) {
  if (!(spec.amplitude >= 0.0)) throw ConfigError("make_cosine_quadratic: amplitude must be >= 0");
  if (!(spec.frequency > 0.0)) throw ConfigError("make_cosine_quadratic: frequency must be > 0");
  Objective obj = make_quadratic(spec);
  obj.kind_ = ObjectiveKind::cosine_quadratic;
  obj.amplitude_ = spec.amplitude;
  obj.frequency_ = spec.frequency;
  obj.optimum_.reset();

  const double bump = spec.amplitude * spec.frequency * spec.frequency;
  ObjectiveConstants k;
  k.L = spec.L + bump;
  k.c = std::max(0.0, spec.c - bump);
  k.f_star = obj.spread_energy_ - spec.amplitude * static_cast<double>(spec.d);
  k.estimated = true;
  obj.constants_ = k;

  // The region stays anchored at the quadratic part's minimizer.
  const double radius = spec.region_radius.value_or(std::max(1.0, 2.0 * obj.region_center_.norm()));
  std::mt19937_64 probe_rng(spec.seed ^ 0x5DEECE66DULL);
  obj.constants_ = measure_constants(obj, radius, 64, probe_rng);
  return obj;
}

/// Binary logistic regression with l2/2 ||x||^2 regularization. Labels are
/// +1 for the first ceil(m/2) samples and -1 for the rest.
inline Objective make_logistic(const LogisticSpec& spec) {
  if (spec.d < 1) throw ConfigError("make_logistic: d must be >= 1");
  if (spec.m < 2) throw ConfigError("make_logistic: m must be >= 2");
  if (!(spec.l2 >= 0.0)) throw ConfigError("make_logistic: l2 must be >= 0");

  const Eigen::Index d = spec.d;
  const Eigen::Index m = spec.m;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Objective obj;
  obj.kind_ = ObjectiveKind::logistic;
  obj.d_ = d;
  obj.m_ = m;
  obj.l2_ = spec.l2;
  obj.region_center_ = ParamVector::Zero(d);
  obj.centers_.resize(d, m);
  obj.labels_.resize(m);
  const Eigen::Index positives = (m + 1) / 2;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < m; ++i) {
    obj.labels_[i] = i < positives ? 1.0 : -1.0;
    for (Eigen::Index j = 0; j < d; ++j) obj.centers_(j, i) = scale * normal(rng);
  }

  double max_row = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) max_row = std::max(max_row, obj.centers_.col(i).squaredNorm());

  ObjectiveConstants k;
  k.L = spec.l2 + 0.25 * max_row;
  k.c = spec.l2;
  k.f_star = 0.0;
  k.estimated = true;
  obj.constants_ = k;

  std::mt19937_64 probe_rng(spec.seed ^ 0x5DEECE66DULL);
  obj.constants_ = measure_constants(obj, spec.region_radius, 64, probe_rng);
  return obj;
}

inline double eval(const Objective& obj, const ParamVector& x) {
  require_dimension(x, obj.dimension(), "eval");
  return obj.eval(x);
}

inline ParamVector full_gradient(const Objective& obj, const ParamVector& x) {
  require_dimension(x, obj.dimension(), "full_gradient");
  ParamVector g(obj.dimension());
  obj.full_gradient(x, g);
  return g;
}

/// Gradient of sample `index`.
inline ParamVector sample_gradient(const Objective& obj, Eigen::Index index, const ParamVector& x) {
  require_dimension(x, obj.dimension(), "sample_gradient");
  if (index < 0 || index >= obj.sample_count()) throw std::out_of_range("sample_gradient: index out of range");
  ParamVector g(obj.dimension());
  obj.sample_gradient(index, x, g);
  return g;
}

/// Gradient of one sample drawn uniformly with replacement from `rng`.
template <class Rng>
ParamVector stochastic_gradient(const Objective& obj, const ParamVector& x, Rng& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, obj.sample_count() - 1);
  return sample_gradient(obj, pick(rng), x);
}

}  // namespace elastic
