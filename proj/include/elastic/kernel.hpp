#pragma once

// The elastic-consistency state machine: global parameter x_t, per-worker
// views v_t^i, the single-step (x -= u_actor) and parallel-step
// (x -= sum_{j in I_t} u_j / p) updates, and the consistency gap
// ||x_t - v_t^i||^2.

#include "elastic/oracle.hpp"
#include "elastic/relaxations.hpp"
#include "elastic/state.hpp"
#include "elastic/theory.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace elastic {

namespace detail {

inline bool is_crash_scheme(Scheme s) { return s == Scheme::crash_m2 || s == Scheme::crash_var; }

inline bool event_fits(Scheme s, EventKind k) {
  switch (k) {
    case EventKind::crash: return is_crash_scheme(s);
    case EventKind::omit: return s == Scheme::omission;
    case EventKind::delay: return s == Scheme::async_mp;
    case EventKind::late: return s == Scheme::elastic_norm || s == Scheme::elastic_var;
  }
  return false;
}

inline void check_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace detail

/// Rejects configurations outside the declared parameter ranges.
inline void validate(const RunConfig& cfg, Eigen::Index d, Eigen::Index m, bool has_optimum) {
  const auto& r = cfg.scheme;
  if (cfg.p < 1) throw ConfigError("p must be >= 1");
  if (cfg.T < 1) throw ConfigError("T must be >= 1");
  if (d < 1) throw ConfigError("objective dimension must be >= 1");
  if (m < 1) throw ConfigError("objective needs at least one sample");
  if (const auto need = required_mode(r.scheme); need && *need != cfg.mode) {
    throw ConfigError(std::string(to_string(r.scheme)) + " requires " + std::string(to_string(*need)) + " mode");
  }
  if (r.f < 0) throw ConfigError("f must be >= 0");
  if (detail::is_crash_scheme(r.scheme) && r.f > cfg.p / 2) throw ConfigError("crash schemes require f <= floor(p/2)");
  if (r.scheme == Scheme::omission && r.f > cfg.p - 1) throw ConfigError("omission requires f <= p - 1");
  if (r.tau_max < 0) throw ConfigError("tau_max must be >= 0");
  if (!(r.beta >= 0.0 && r.beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(r.b_adv >= 0.0) || !std::isfinite(r.b_adv)) throw ConfigError("B_adv must be finite and >= 0");
  detail::check_probability(r.crash_prob, "crash_prob");
  detail::check_probability(r.late_prob, "late_prob");
  detail::check_probability(r.drop_prob, "drop_prob");
  if (!(r.release_prob > 0.0 && r.release_prob <= 1.0)) throw ConfigError("release_prob must lie in (0, 1]");
  if (r.scheme == Scheme::compress_ef) r.compressor.build(d);
  if (r.scheme == Scheme::adversarial) {
    if (m != 1) throw ConfigError("adversarial scheme needs a single-sample (deterministic) objective");
    if (!has_optimum) throw ConfigError("adversarial scheme needs an objective with a known optimum");
  }
  if (r.schedule) {
    for (const auto& e : *r.schedule) {
      if (!detail::event_fits(r.scheme, e.kind)) {
        throw ConfigError("schedule event '" + std::string(to_string(e.kind)) + "' does not apply to scheme " +
                          std::string(to_string(r.scheme)));
      }
      if (e.t < 0 || e.t >= cfg.T) throw ConfigError("schedule event iteration out of range");
      if (e.node < 0 || e.node >= cfg.p) throw ConfigError("schedule event node out of range");
      for (int target : e.targets) {
        if (target < 0 || target >= cfg.p) throw ConfigError("schedule event target out of range");
      }
    }
  }
}

template <GradientOracle O>
SimState init_run(const RunConfig& cfg, const O& obj) {
  const Eigen::Index d = obj.dimension();
  validate(cfg, d, obj.sample_count(), obj.optimum().has_value());

  SimState s;
  s.config = cfg;
  if constexpr (HasConstants<O>) {
    s.alpha = resolve_alpha(cfg.alpha, cfg.T, cfg.p, &obj.constants());
  } else {
    s.alpha = resolve_alpha(cfg.alpha, cfg.T, cfg.p, nullptr);
  }
  s.d = d;
  s.x = ParamVector::Zero(d);
  s.data = CounterStream(cfg.seeds.data);
  s.sched = CounterStream(cfg.seeds.sched);
  s.workers.resize(static_cast<std::size_t>(cfg.p));
  for (int i = 0; i < cfg.p; ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    w.id = i;
    w.view = ParamVector::Zero(d);
    w.error_acc = ParamVector::Zero(d);
  }
  s.gradients = Matrix::Zero(d, cfg.p);
  s.updates = Matrix::Zero(d, cfg.p);
  s.prev_updates = Matrix::Zero(d, cfg.p);
  s.credited_gradient_sum = ParamVector::Zero(d);
  s.scratch = ParamVector::Zero(d);
  s.scratch_grad = ParamVector::Zero(d);
  if (cfg.scheme.scheme == Scheme::shared_mem) s.history.push_front(s.x);
  if (cfg.scheme.scheme == Scheme::compress_ef) s.compressor = cfg.scheme.compressor.build(d);
  if (cfg.scheme.schedule) {
    for (const auto& e : *cfg.scheme.schedule) s.plan[e.t].push_back(e);
  }
  if constexpr (HasRegion<O>) {
    const double r = obj.constants().region_radius;
    if (r > 0.0) s.region_radius2 = r * r;
  }
  if (cfg.metrics.keep_records) s.records.reserve(static_cast<std::size_t>(std::min<long>(cfg.T, 1L << 20) + 1));
  return s;
}

inline double consistency_gap(const SimState& s, int i) {
  if (i < 0 || i >= s.p()) throw ConfigError("worker index out of range");
  return (s.x - s.workers[static_cast<std::size_t>(i)].view).squaredNorm();
}

/// Records iteration t's quantities at x_t and v_t.
template <GradientOracle O>
void observe(SimState& s, const O& obj, int participants) {
  const auto& m = s.config.metrics;
  IterationRecord rec;
  rec.t = s.t;
  rec.participants = participants;
  if (m.values) {
    rec.f_value = obj.eval(s.x);
    obj.full_gradient(s.x, s.scratch_grad);
    rec.grad_norm2 = s.scratch_grad.squaredNorm();
    s.summary.min_grad_norm2 = std::min(s.summary.min_grad_norm2, rec.grad_norm2);
    if (const auto& opt = obj.optimum()) rec.dist2_to_opt = (s.x - *opt).squaredNorm();
  }
  if (m.gaps) {
    rec.gap2.assign(static_cast<std::size_t>(s.p()), 0.0);
    rec.alive.assign(static_cast<std::size_t>(s.p()), 0);
    for (int i = 0; i < s.p(); ++i) {
      if (!s.alive(i)) continue;
      const double g = consistency_gap(s, i);
      if (!std::isfinite(g)) throw InvariantViolation("finiteness", "non-finite gap at t = " + std::to_string(s.t));
      rec.gap2[static_cast<std::size_t>(i)] = g;
      rec.alive[static_cast<std::size_t>(i)] = 1;
      s.summary.max_gap2 = std::max(s.summary.max_gap2, g);
    }
  }
  if constexpr (HasRegion<O>) {
    if ((s.x - obj.region_center()).squaredNorm() > s.region_radius2) ++s.summary.region_excursions;
  }
  if (m.keep_records) s.records.push_back(std::move(rec));
}

/// Throws unless x equals the explicit sum of credited gradients.
inline void check_bookkeeping(const SimState& s) {
  const double coef = s.config.mode == StepMode::single_step ? s.alpha : s.alpha / s.p();
  const double err = (s.x + coef * s.credited_gradient_sum).cwiseAbs().maxCoeff();
  if (err > 1e-12 * std::max(1.0, s.credited_magnitude)) {
    throw InvariantViolation("bookkeeping identity",
                             "x deviates from the credited gradient sum by " + std::to_string(err) + " at t = " +
                                 std::to_string(s.t));
  }
}

/// Advances one iteration.
template <GradientOracle O>
void step(SimState& s, const O& obj) {
  if (s.t >= s.config.T || s.finished) throw std::logic_error("step past T");
  const int p = s.p();
  const bool single = s.config.mode == StepMode::single_step;
  const auto m = static_cast<std::uint64_t>(obj.sample_count());

  prepare_views(s, obj);

  int actor = -1;
  if (single) {
    for (int k = 0; k < p; ++k) {
      const int cand = (s.next_actor + k) % p;
      if (s.alive(cand)) {
        actor = cand;
        break;
      }
    }
    if (actor < 0) throw InvariantViolation("participation", "no alive worker");
    s.next_actor = (actor + 1) % p;
  }
  observe(s, obj, single ? 1 : 0);

  for (int j = 0; j < p; ++j) {
    if (!s.alive(j) || (single && j != actor)) continue;
    const auto idx = static_cast<Eigen::Index>(
        s.data.below(m, DrawTag::sample, {detail::key(s.t), detail::key(j)}));
    obj.sample_gradient(idx, s.workers[static_cast<std::size_t>(j)].view, s.scratch_grad);
    s.gradients.col(j) = s.scratch_grad;
    s.updates.col(j) = s.alpha * s.scratch_grad;
  }

  if (single) {
    s.x.noalias() -= s.updates.col(actor);
    s.credited_gradient_sum += s.gradients.col(actor);
    s.credited_magnitude += s.updates.col(actor).cwiseAbs().maxCoeff();
    s.participants.assign(1, actor);
  } else {
    deliver(s);
    const int size = static_cast<int>(s.participants.size());
    if (size < (p + 1) / 2 || size > p) {
      throw InvariantViolation("participation", "|I_t| = " + std::to_string(size) + " outside [ceil(p/2), p] at t = " +
                                                    std::to_string(s.t));
    }
    ParamVector& sum = s.scratch;
    sum.setZero();
    for (int j : s.participants) {
      sum += s.updates.col(j);
      s.credited_gradient_sum += s.gradients.col(j);
    }
    s.x.noalias() -= sum / static_cast<double>(p);
    s.credited_magnitude += sum.cwiseAbs().maxCoeff() / p;
  }
  if (!s.records.empty() && !single) s.records.back().participants = static_cast<int>(s.participants.size());

  if (s.crash_count > s.config.scheme.f && detail::is_crash_scheme(s.config.scheme.scheme)) {
    throw InvariantViolation("crash budget", "crash_count exceeds f");
  }
  if (!all_finite(s.x)) throw InvariantViolation("finiteness", "x became non-finite at t = " + std::to_string(s.t));
  if (s.config.metrics.check_bookkeeping) check_bookkeeping(s);

  s.prev_updates = s.updates;
  if (s.config.scheme.scheme == Scheme::shared_mem) {
    s.history.push_front(s.x);
    while (static_cast<long>(s.history.size()) > s.config.scheme.tau_max + 1) s.history.pop_back();
  }
  ++s.t;
}

/// Appends the record for t = T and fills the run summary.
template <GradientOracle O>
void finish(SimState& s, const O& obj) {
  if (s.finished) return;
  observe(s, obj, 0);
  s.summary.final_f = obj.eval(s.x);
  if (const auto& opt = obj.optimum()) s.summary.final_dist2 = (s.x - *opt).squaredNorm();
  s.finished = true;
}

template <GradientOracle O>
SimState run_trial(const RunConfig& cfg, const O& obj) {
  SimState s = init_run(cfg, obj);
  while (s.t < cfg.T) step(s, obj);
  finish(s, obj);
  return s;
}

/// sqrt(max over (t, i) of the mean-over-runs gap) / alpha. The mean at (t, i)
/// runs over the runs in which worker i is alive at t.
inline double empirical_B(std::span<const std::vector<IterationRecord>> runs, double alpha) {
  if (runs.empty()) throw ConfigError("empirical_B: no runs");
  if (!(alpha > 0.0)) throw ConfigError("empirical_B: alpha must be > 0");
  std::size_t len = runs[0].size();
  for (const auto& r : runs) len = std::min(len, r.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    const std::size_t workers = runs[0][t].gap2.size();
    for (std::size_t i = 0; i < workers; ++i) {
      double sum = 0.0;
      long n = 0;
      for (const auto& r : runs) {
        const auto& rec = r[t];
        if (i < rec.alive.size() && rec.alive[i]) {
          sum += rec.gap2[i];
          ++n;
        }
      }
      if (n > 0) worst = std::max(worst, sum / static_cast<double>(n));
    }
  }
  return std::sqrt(worst) / alpha;
}

}  // namespace elastic
