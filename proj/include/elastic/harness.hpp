#pragma once

// Multi-trial orchestration and the experiments built on it: gap statistics
// and bound verification, the adversarial lower-bound table, parameter sweeps.

#include "elastic/io.hpp"
#include "elastic/kernel.hpp"
#include "elastic/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace elastic {

struct TrialResult {
  Seeds seeds{};
  double alpha = 0.0;
  std::vector<IterationRecord> records;
  std::vector<ScheduleEvent> events;
  RunSummary summary{};
  SchemeStats stats{};
  long substitutions = 0;
  long corrections = 0;
};

/// Seeds of trial k: both base seeds split by the trial index.
inline Seeds trial_seeds(Seeds base, int k) {
  const auto idx = static_cast<std::uint64_t>(k);
  return {CounterStream(base.data).split(idx).seed(), CounterStream(base.sched).split(idx).seed()};
}

template <GradientOracle O>
TrialResult run_one(RunConfig cfg, const O& obj) {
  SimState s = run_trial(cfg, obj);
  TrialResult r;
  r.seeds = cfg.seeds;
  r.alpha = s.alpha;
  r.records = std::move(s.records);
  r.events = std::move(s.events);
  r.summary = s.summary;
  r.stats = s.stats;
  for (const auto& w : s.workers) {
    r.substitutions += w.substitutions_made;
    r.corrections += w.corrections_made;
  }
  return r;
}

/// Runs `trials` independent trials, concurrently when threads allow. Results
/// are in trial order and do not depend on the thread count.
template <GradientOracle O>
std::vector<TrialResult> run_trials(const RunConfig& base, const O& obj, int trials, unsigned threads = 0) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  std::vector<TrialResult> results(static_cast<std::size_t>(trials));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < trials; k = next++) {
      RunConfig cfg = base;
      cfg.seeds = trial_seeds(base.seeds, k);
      try {
        results[static_cast<std::size_t>(k)] = run_one(cfg, obj);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(trials));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Per-(t, i) mean and standard error of the gap over trials, counting only
/// trials where worker i is alive at t.
class GapAccumulator {
 public:
  void add(const std::vector<IterationRecord>& records) {
    if (cells_.size() < records.size()) cells_.resize(records.size());
    for (std::size_t t = 0; t < records.size(); ++t) {
      const auto& rec = records[t];
      auto& row = cells_[t];
      if (row.size() < rec.gap2.size()) row.resize(rec.gap2.size());
      for (std::size_t i = 0; i < rec.gap2.size(); ++i) {
        if (!rec.alive[i]) continue;
        auto& c = row[i];
        ++c.n;
        c.sum += rec.gap2[i];
        c.sum2 += rec.gap2[i] * rec.gap2[i];
      }
    }
    ++runs_;
  }

  long runs() const noexcept { return runs_; }

  double max_mean() const {
    double worst = 0.0;
    for (const auto& row : cells_) {
      for (const auto& c : row) {
        if (c.n > 0) worst = std::max(worst, c.mean());
      }
    }
    return worst;
  }

  double empirical_B(double alpha) const { return std::sqrt(max_mean()) / alpha; }

  /// Largest of mean - bound2 - se_factor * se over all cells; <= 0 passes.
  double max_excess(double bound2, double se_factor) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& row : cells_) {
      for (const auto& c : row) {
        if (c.n > 0) worst = std::max(worst, c.mean() - bound2 - se_factor * c.se());
      }
    }
    return worst;
  }

 private:
  struct Cell {
    long n = 0;
    double sum = 0.0;
    double sum2 = 0.0;
    double mean() const { return sum / static_cast<double>(n); }
    double se() const {
      if (n < 2) return 0.0;
      const double m = mean();
      const double var = std::max(0.0, (sum2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
      return std::sqrt(var / static_cast<double>(n));
    }
  };
  std::vector<std::vector<Cell>> cells_;
  long runs_ = 0;
};

enum class BoundStatus { pass, fail, measured };

inline std::string_view to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::pass: return "PASS";
    case BoundStatus::fail: return "FAIL";
    case BoundStatus::measured: return "MEASURED";
  }
  return "FAIL";
}

struct BoundRow {
  std::string label;
  TheoryBound theory;
  double alpha = 0.0;
  double B_empirical = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double max_excess = 0.0;
  int trials = 0;
  BoundStatus status = BoundStatus::fail;
  std::string note;
};

inline std::string scheme_label(const RelaxationConfig& r) {
  std::string out(to_string(r.scheme));
  switch (r.scheme) {
    case Scheme::crash_m2:
    case Scheme::crash_var:
    case Scheme::omission: out += " f=" + std::to_string(r.f); break;
    case Scheme::async_mp:
    case Scheme::shared_mem: out += " tau_max=" + std::to_string(r.tau_max); break;
    case Scheme::compress_ef: out += " " + to_string(r.compressor); break;
    case Scheme::elastic_norm: out += " beta=" + format_number(r.beta); break;
    case Scheme::adversarial: out += " B_adv=" + format_number(r.b_adv); break;
    default: break;
  }
  return out;
}

/// Mean-over-trials gap against (alpha B_theory (1 + tol))^2 plus se_factor
/// standard errors, at every (t, i). The adversarial row must also match B_adv
/// to 1e-12.
inline BoundRow verify_bound(const RunConfig& run, const Objective& obj, int trials, double tol, double se_factor) {
  if (trials < 30) throw ConfigError("verify-bounds needs at least 30 trials");
  RunConfig cfg = run;
  cfg.metrics.gaps = true;
  cfg.metrics.keep_records = true;

  BoundRow row;
  row.label = scheme_label(cfg.scheme);
  row.theory = bound_B(cfg.scheme, obj.constants(), cfg.p, obj.dimension());
  row.trials = trials;

  GapAccumulator acc;
  double alpha = 0.0;
  for (const auto& r : run_trials(cfg, obj, trials)) {
    acc.add(r.records);
    alpha = r.alpha;
  }
  row.alpha = alpha;
  row.B_empirical = acc.empirical_B(alpha);

  const auto scheme = cfg.scheme.scheme;
  if ((scheme == Scheme::crash_var || scheme == Scheme::elastic_var) && alpha > 1.0 / (6.0 * obj.constants().L)) {
    row.note = "alpha exceeds 1/(6L); the variance-form bound assumes alpha <= 1/(6L)";
  }
  if (row.theory.measured_only()) {
    row.status = BoundStatus::measured;
    return row;
  }
  const double B = *row.theory.B;
  if (B > 0.0) row.ratio = row.B_empirical / B;
  const double bound = alpha * B * (1.0 + tol);
  row.max_excess = acc.max_excess(bound * bound, se_factor);
  bool ok = row.max_excess <= 0.0;
  if (scheme == Scheme::adversarial) ok = ok && std::abs(row.B_empirical - B) <= 1e-12;
  row.status = ok ? BoundStatus::pass : BoundStatus::fail;
  return row;
}

inline json bound_row_to_json(const BoundRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"scheme", r.label},
         {"B_theory", r.theory.B ? json(*r.theory.B) : json(nullptr)},
         {"B_empirical", r.B_empirical},
         {"ratio", num(r.ratio)},
         {"status", std::string(to_string(r.status))},
         {"alpha", r.alpha},
         {"trials", r.trials},
         {"provenance", r.theory.provenance}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

// ---- lower bound -------------------------------------------------------

/// f(x) = 1/2 (x - 1)^2 in one dimension; from x_0 = 0 this is 1/2 x^2 started
/// at distance 1 from the optimum.
inline Objective lower_bound_objective() {
  QuadraticSpec q;
  q.d = 1;
  q.m = 1;
  q.c = 1.0;
  q.L = 1.0;
  q.center = 1.0;
  return make_quadratic(q);
}

/// First t with ||x_t - x*||^2 <= eps under the adversarial oracle, or nullopt
/// when the run stalls above eps or reaches the cap.
inline std::optional<long> iterations_to_eps(const Objective& obj, double b_adv, double alpha, double eps, long cap) {
  RunConfig cfg;
  cfg.p = 1;
  cfg.T = cap;
  cfg.alpha = AlphaSpec::fixed(alpha);
  cfg.mode = StepMode::single_step;
  cfg.scheme.scheme = Scheme::adversarial;
  cfg.scheme.b_adv = b_adv;
  cfg.metrics = {false, false, false, false};
  SimState s = init_run(cfg, obj);
  const ParamVector& opt = *obj.optimum();
  ParamVector prev = s.x;
  while (true) {
    if ((s.x - opt).squaredNorm() <= eps) return s.t;
    if (s.t >= cap) return std::nullopt;
    prev = s.x;
    step(s, obj);
    if ((s.x - prev).cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + s.x.cwiseAbs().maxCoeff())) return std::nullopt;
  }
}

struct LowerBoundRow {
  double B = 0.0;
  double alpha = 0.0;
  std::optional<long> iterations;  // nullopt: above the cap for every alpha
};

inline std::vector<double> alpha_grid(const LowerBoundConfig& c) {
  if (!(c.alpha_min > 0.0 && c.alpha_max >= c.alpha_min && c.alpha_max < 1.0)) {
    throw ConfigError("lower bound: need 0 < alpha_min <= alpha_max < 1");
  }
  if (c.alpha_points < 1) throw ConfigError("lower bound: alpha_points must be >= 1");
  std::vector<double> grid;
  const double lo = std::log(c.alpha_min);
  const double hi = std::log(c.alpha_max);
  for (int k = 0; k < c.alpha_points; ++k) {
    grid.push_back(c.alpha_points == 1 ? c.alpha_max : std::exp(lo + (hi - lo) * k / (c.alpha_points - 1)));
  }
  return grid;
}

/// For each B, the alpha on the grid that reaches eps in the fewest
/// iterations (ties go to the larger alpha), and that iteration count.
inline std::vector<LowerBoundRow> lower_bound_table(const LowerBoundConfig& c) {
  if (c.b_values.empty()) throw ConfigError("lower bound: empty B list");
  if (!(c.eps > 0.0)) throw ConfigError("lower bound: eps must be > 0");
  if (c.cap < 1) throw ConfigError("lower bound: cap must be >= 1");
  const Objective obj = lower_bound_objective();
  const auto grid = alpha_grid(c);
  std::vector<LowerBoundRow> rows;
  for (double B : c.b_values) {
    if (!(B >= 0.0)) throw ConfigError("lower bound: B must be >= 0");
    LowerBoundRow row{B, grid.back(), std::nullopt};
    long budget = c.cap;
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
      const auto n = iterations_to_eps(obj, B, *it, c.eps, budget);
      if (n && (!row.iterations || *n < *row.iterations)) {
        row.iterations = n;
        row.alpha = *it;
        budget = *n;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

// ---- sweep -------------------------------------------------------------

struct SweepRow {
  json cell;
  int trials = 0;
  double alpha = 0.0;
  double mean_final_f = 0.0, se_final_f = 0.0;
  double mean_final_dist2 = 0.0, se_final_dist2 = 0.0;
  double mean_min_grad_norm2 = 0.0, se_min_grad_norm2 = 0.0;
  double mean_max_gap2 = 0.0, se_max_gap2 = 0.0;
  double empirical_B = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double n = static_cast<double>(v.size());
  const double mean = sum / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Summary statistics of one configuration over its trials.
inline SweepRow summarize_cell(const RunConfig& run, const Objective& obj, int trials) {
  SweepRow row;
  row.trials = trials;
  std::vector<double> f, dist, grad, gap;
  GapAccumulator acc;
  for (const auto& r : run_trials(run, obj, trials)) {
    row.alpha = r.alpha;
    f.push_back(r.summary.final_f);
    dist.push_back(r.summary.final_dist2);
    grad.push_back(r.summary.min_grad_norm2);
    gap.push_back(r.summary.max_gap2);
    acc.add(r.records);
  }
  std::tie(row.mean_final_f, row.se_final_f) = detail::mean_se(f);
  std::tie(row.mean_final_dist2, row.se_final_dist2) = detail::mean_se(dist);
  std::tie(row.mean_min_grad_norm2, row.se_min_grad_norm2) = detail::mean_se(grad);
  std::tie(row.mean_max_gap2, row.se_max_gap2) = detail::mean_se(gap);
  row.empirical_B = acc.runs() > 0 ? acc.empirical_B(row.alpha) : 0.0;
  return row;
}

struct SweepCell {
  json cell;  // axis -> value
  RunConfig run;
};

/// Cross product of the sweep axes applied to the base run. With no axes the
/// base configuration is the single cell.
inline std::vector<SweepCell> expand_cells(const ExperimentConfig& c) {
  for (const auto& axis : c.sweep) {
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.key + "' is empty");
  }
  std::vector<SweepCell> cells;
  std::vector<std::size_t> index(c.sweep.size(), 0);
  while (true) {
    json run = run_to_json(c.run);
    json cell = json::object();
    for (std::size_t a = 0; a < c.sweep.size(); ++a) {
      const auto& axis = c.sweep[a];
      run[axis.key] = axis.values[index[a]];
      cell[axis.key] = axis.values[index[a]];
      if (axis.key == "scheme") run.erase("mode");
    }
    RunConfig cfg = run_from_json(run);
    cfg.seeds = c.run.seeds;
    cfg.metrics = c.run.metrics;
    cells.push_back({std::move(cell), std::move(cfg)});

    std::size_t a = 0;
    for (; a < index.size(); ++a) {
      if (++index[a] < c.sweep[a].values.size()) break;
      index[a] = 0;
    }
    if (a == index.size()) break;
  }
  return cells;
}

inline std::vector<SweepRow> sweep(const ExperimentConfig& c, const Objective& obj) {
  std::vector<SweepRow> rows;
  for (auto& cell : expand_cells(c)) {
    SweepRow row = summarize_cell(cell.run, obj, c.trials);
    row.cell = std::move(cell.cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows,
                            const std::vector<SweepAxis>& axes) {
  for (const auto& axis : axes) out << axis.key << ',';
  out << "trials,alpha,final_f_mean,final_f_se,final_dist2_mean,final_dist2_se,min_grad_norm2_mean,"
         "min_grad_norm2_se,max_gap2_mean,max_gap2_se,empirical_B\n";
  for (const auto& r : rows) {
    for (const auto& axis : axes) {
      const auto& v = r.cell.at(axis.key);
      out << (v.is_string() ? v.get<std::string>() : v.dump()) << ',';
    }
    out << r.trials << ',' << format_number(r.alpha) << ',' << format_number(r.mean_final_f) << ','
        << format_number(r.se_final_f) << ',' << format_number(r.mean_final_dist2) << ','
        << format_number(r.se_final_dist2) << ',' << format_number(r.mean_min_grad_norm2) << ','
        << format_number(r.se_min_grad_norm2) << ',' << format_number(r.mean_max_gap2) << ','
        << format_number(r.se_max_gap2) << ',' << format_number(r.empirical_B) << '\n';
  }
}

inline json summary_to_json(const TrialResult& r, int index) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"trial", index},
          {"seeds", {{"data", r.seeds.data}, {"sched", r.seeds.sched}}},
          {"alpha", r.alpha},
          {"final_f", num(r.summary.final_f)},
          {"final_dist2", num(r.summary.final_dist2)},
          {"min_grad_norm2", num(r.summary.min_grad_norm2)},
          {"max_gap2", r.summary.max_gap2},
          {"region_excursions", r.summary.region_excursions},
          {"events", r.events.size()},
          {"substitutions", r.substitutions},
          {"corrections", r.corrections},
          {"proceed_events", r.stats.proceed_events},
          {"max_backlog", r.stats.max_backlog}};
}

}  // namespace elastic
