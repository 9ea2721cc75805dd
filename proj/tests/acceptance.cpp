// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "elastic/elastic.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace elastic;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string config_path(const std::string& name) { return std::string(ELASTIC_CONFIG_DIR) + "/" + name; }

Objective quadratic(Eigen::Index d, Eigen::Index m) {
  QuadraticSpec q = default_quadratic();
  q.d = d;
  q.m = m;
  return make_quadratic(q);
}

RunConfig base_run(Scheme s, int p, long T, double alpha = 0.05) {
  RunConfig c;
  c.p = p;
  c.T = T;
  c.alpha = AlphaSpec::fixed(alpha);
  c.scheme.scheme = s;
  c.mode = required_mode(s).value_or(StepMode::parallel_step);
  return c;
}

/// Forwards to an objective and records every sample index drawn.
struct RecordingOracle {
  const Objective& obj;
  mutable std::vector<Eigen::Index> drawn;

  Eigen::Index dimension() const { return obj.dimension(); }
  Eigen::Index sample_count() const { return obj.sample_count(); }
  void sample_gradient(Eigen::Index i, const ParamVector& x, ParamVector& out) const {
    drawn.push_back(i);
    obj.sample_gradient(i, x, out);
  }
  void full_gradient(const ParamVector& x, ParamVector& out) const { obj.full_gradient(x, out); }
  double eval(const ParamVector& x) const { return obj.eval(x); }
  const std::optional<ParamVector>& optimum() const { return obj.optimum(); }
};

// ---- 1: identities ------------------------------------------------------

void identities(Outcome& out) {
  {
    const auto obj = quadratic(16, 64);
    auto c = base_run(Scheme::compress_ef, 4, 200);
    c.scheme.compressor = {CompressorKind::topk, 4};
    auto s = init_run(c, obj);
    double worst = 0.0;
    while (s.t < c.T) {
      step(s, obj);
      ParamVector mean = ParamVector::Zero(16);
      for (const auto& w : s.workers) mean += w.error_acc;
      mean /= 4.0;
      for (const auto& w : s.workers) worst = std::max(worst, (w.view - s.x - mean).cwiseAbs().maxCoeff());
    }
    out.detail << " ef-view " << worst;
    out.require(worst <= 1e-9, "error-feedback identity");
  }
  {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> n;
    double worst = 0.0;
    for (const auto& q : {Compressor::topk(16, 3), Compressor::onebit(16), Compressor::identity(16)}) {
      for (int k = 0; k < 1000; ++k) {
        ParamVector e(16), g(16);
        for (Eigen::Index i = 0; i < 16; ++i) {
          e[i] = n(gen);
          g[i] = n(gen);
        }
        const auto r = ef_update(e, g, 0.1, q);
        const ParamVector input = e + 0.1 * g;
        worst = std::max(worst, (r.payload + r.new_error - input).cwiseAbs().maxCoeff());
      }
    }
    out.detail << ", ef_update " << worst;
    out.require(worst <= 1e-15, "ef_update decomposition");
  }
  {
    QuadraticSpec q = default_quadratic();
    q.amplitude = 0.25;
    q.frequency = 2;
    LogisticSpec l;
    l.d = 10;
    l.m = 64;
    l.seed = 3;
    l.l2 = 0.01;
    const std::vector<Objective> objs{make_quadratic(default_quadratic()), make_cosine_quadratic(q), make_logistic(l)};
    std::mt19937_64 gen(9);
    std::normal_distribution<double> n;
    double worst = 0.0;
    for (const auto& obj : objs) {
      for (int k = 0; k < 5; ++k) {
        ParamVector x(obj.dimension()), g(obj.dimension()), full(obj.dimension());
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = n(gen);
        ParamVector avg = ParamVector::Zero(x.size());
        for (Eigen::Index i = 0; i < obj.sample_count(); ++i) {
          obj.sample_gradient(i, x, g);
          avg += g;
        }
        avg /= static_cast<double>(obj.sample_count());
        obj.full_gradient(x, full);
        worst = std::max(worst, (avg - full).cwiseAbs().maxCoeff());
      }
    }
    out.detail << ", unbiased " << worst;
    out.require(worst <= 1e-12, "unbiasedness");
  }
  {
    const auto obj = quadratic(10, 64);
    const auto adv = quadratic(10, 1);
    double worst = 0.0;
    auto check = [&](RunConfig c) {
      c.metrics.check_bookkeeping = true;
      const auto s = run_trial(c, c.scheme.scheme == Scheme::adversarial ? adv : obj);
      const double coef = c.mode == StepMode::single_step ? s.alpha : s.alpha / c.p;
      worst = std::max(worst, (s.x + coef * s.credited_gradient_sum).cwiseAbs().maxCoeff());
    };
    for (Scheme sc : kAllSchemes) {
      auto c = base_run(sc, 8, 100);
      auto& r = c.scheme;
      r.f = 2;
      r.tau_max = 3;
      r.crash_prob = 0.02;
      r.late_prob = 0.3;
      r.release_prob = 0.5;
      r.drop_prob = 0.1;
      r.beta = 0.5;
      r.compressor = {CompressorKind::topk, 3};
      r.b_adv = 2;
      check(c);
      if (sc == Scheme::exact) {
        c.mode = StepMode::single_step;
        check(c);
      }
    }
    out.detail << ", bookkeeping " << worst;
    out.require(worst <= 1e-12, "bookkeeping identity");
  }
}

// ---- 2: contraction -----------------------------------------------------

void contraction(Outcome& out) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> n;
  long violations = 0, checked = 0;
  for (Eigen::Index d : {8, 32, 257}) {
    std::vector<Compressor> qs{Compressor::topk(d, 1), Compressor::topk(d, d / 2), Compressor::topk(d, d - 1),
                               Compressor::onebit(d)};
    for (const auto& q : qs) {
      for (int k = 0; k < 10000; ++k) {
        ParamVector w(d);
        for (Eigen::Index i = 0; i < d; ++i) w[i] = n(gen);
        if (k % 4 == 1) w = w.cwiseAbs();
        if (k % 4 == 2) w = w.array().cube();
        const double lhs = (q(w) - w).squaredNorm();
        const double rhs = q.gamma() * w.squaredNorm();
        if (lhs > rhs * (1 + 1e-12)) ++violations;
        ++checked;
      }
    }
    const auto q = Compressor::topk(d, d / 2);
    const ParamVector tie = ParamVector::Ones(d);
    const double lhs = (q(tie) - tie).squaredNorm();
    const double rhs = q.gamma() * tie.squaredNorm();
    out.require(std::abs(lhs - rhs) <= 1e-12 * rhs, "topk tie equality at d=" + std::to_string(d));
  }
  out.detail << " " << checked << " vectors, " << violations << " violations, tie equality checked";
  out.require(violations == 0, "contraction violations");
}

// ---- 3: consistency bounds ----------------------------------------------

void consistency_bounds(Outcome& out) {
  const char* files[] = {"accept_bounds_faults.json",     "accept_bounds_async.json",
                         "accept_bounds_shared.json",     "accept_bounds_compress.json",
                         "accept_bounds_elastic_var.json", "accept_bounds_adversarial.json"};
  int rows = 0;
  for (const char* f : files) {
    const auto cfg = load_experiment(config_path(f));
    const auto obj = build_objective(cfg.objective);
    for (const auto& cell : expand_cells(cfg)) {
      const auto row = verify_bound(cell.run, obj, cfg.trials, cfg.tol, cfg.se_factor);
      ++rows;
      std::printf("    %-24s B_theory %-12.6g B_emp %-12.6g %s\n", row.label.c_str(), row.theory.B.value_or(NAN),
                  row.B_empirical, std::string(to_string(row.status)).c_str());
      out.require(row.status == BoundStatus::pass, row.label);
    }
  }
  out.detail << " " << rows << " scheme settings, 100 seeds each";
}

// ---- 4: strongly convex convergence --------------------------------------

void strongly_convex(Outcome& out) {
  for (const char* f : {"accept_strongly_convex_seq.json", "accept_strongly_convex_par.json"}) {
    const auto cfg = load_experiment(config_path(f));
    const auto obj = build_objective(cfg.objective);
    RunConfig run = cfg.run;
    run.metrics.keep_records = false;
    const auto th = *run.alpha.theorem;
    const int p_eff = th == Theorem::T3 ? 1 : run.p;
    double mean = 0.0;
    for (const auto& r : run_trials(run, obj, cfg.trials)) mean += r.summary.final_dist2;
    mean /= cfg.trials;
    const double rhs =
        rhs_bound(th, run.T, p_eff, obj.constants(), 0.0, InitialGap::distance2(obj.optimum()->squaredNorm()));
    out.detail << " " << to_string(th) << ": " << mean << " <= " << rhs << ";";
    out.require(mean <= rhs, std::string(to_string(th)) + " rate");
  }
}

// ---- 5: non-convex rate shape -------------------------------------------

void nonconvex_rate(Outcome& out) {
  const auto cfg = load_experiment(config_path("accept_cosine_rate.json"));
  const auto obj = build_objective(cfg.objective);
  const auto rows = sweep(cfg, obj);
  const double ratio = rows.at(0).mean_min_grad_norm2 / rows.at(1).mean_min_grad_norm2;
  out.detail << " min grad^2 T=1600 " << rows[0].mean_min_grad_norm2 << ", T=6400 " << rows[1].mean_min_grad_norm2
             << ", ratio " << ratio;
  out.require(ratio >= 1.4 && ratio <= 2.8, "ratio in [1.4, 2.8]");
}

// ---- 6: lower bound -----------------------------------------------------

void lower_bound(Outcome& out) {
  const auto cfg = load_experiment(config_path("accept_lower_bound.json"));
  const auto rows = lower_bound_table(cfg.lower_bound);
  bool increasing = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.detail << " B=" << rows[k].B << ":" << (rows[k].iterations ? std::to_string(*rows[k].iterations) : "cap");
    out.require(rows[k].iterations.has_value(), "reached eps");
    if (k > 0 && rows[k].iterations && rows[k - 1].iterations) {
      increasing = increasing && *rows[k].iterations > *rows[k - 1].iterations;
    }
  }
  out.require(increasing, "strictly increasing in B");
  out.require(rows.front().B == 1 && rows.back().B == 8, "B grid 1..8");
  if (rows.front().iterations && rows.back().iterations) {
    out.require(*rows.back().iterations >= 4 * *rows.front().iterations, "B=8 >= 4 x B=1");
  }
}

// ---- 7: degeneracy ------------------------------------------------------

void degeneracy(Outcome& out) {
  const auto obj = quadratic(10, 64);
  const auto one = quadratic(10, 1);
  const long T = 300;
  const int p = 8;
  auto same = [](const SimState& a, const SimState& b) {
    return a.x == b.x && csv_string(a.records) == csv_string(b.records);
  };
  const auto par = run_trial(base_run(Scheme::exact, p, T), obj);
  auto single_cfg = base_run(Scheme::exact, p, T);
  single_cfg.mode = StepMode::single_step;
  const auto single = run_trial(single_cfg, obj);
  const auto single_one = run_trial(single_cfg, one);

  int cases = 0;
  auto expect = [&](const char* what, RunConfig c, const SimState& ref, const Objective& o) {
    ++cases;
    out.require(same(run_trial(c, o), ref), what);
  };
  auto c = base_run(Scheme::crash_m2, p, T);
  c.scheme.crash_prob = 0.5;
  expect("crash_m2 f=0", c, par, obj);
  c.scheme.scheme = Scheme::crash_var;
  expect("crash_var f=0", c, par, obj);
  c = base_run(Scheme::omission, p, T);
  c.scheme.late_prob = 0.5;
  expect("omission f=0", c, par, obj);
  expect("async_mp tau=0", base_run(Scheme::async_mp, p, T), par, obj);
  c = base_run(Scheme::compress_ef, p, T);
  c.scheme.compressor = {CompressorKind::identity, 0};
  expect("compress_ef gamma=0", c, par, obj);
  c.scheme.compressor = {CompressorKind::topk, 10};
  expect("compress_ef K=d", c, par, obj);
  c = base_run(Scheme::elastic_norm, p, T);
  c.scheme.late_prob = 0.5;
  expect("elastic_norm beta=1", c, par, obj);
  c.scheme.beta = 0.3;
  c.scheme.late_prob = 0.0;
  expect("elastic_norm full arrival", c, par, obj);
  expect("elastic_var no late", base_run(Scheme::elastic_var, p, T), par, obj);
  expect("shared_mem tau=0", base_run(Scheme::shared_mem, p, T), single, obj);
  expect("adversarial B=0", base_run(Scheme::adversarial, p, T), single_one, one);
  out.detail << " " << cases << " trivial settings bit-identical to exact";
}

// ---- 8: determinism and obliviousness -----------------------------------

void determinism(Outcome& out) {
  const auto obj = quadratic(10, 64);
  for (Scheme sc : {Scheme::crash_m2, Scheme::omission, Scheme::async_mp, Scheme::elastic_var}) {
    auto c = base_run(sc, 8, 400);
    auto& r = c.scheme;
    r.f = 3;
    r.crash_prob = 0.01;
    r.late_prob = 0.3;
    r.release_prob = 0.5;
    r.drop_prob = 0.1;
    r.tau_max = 3;
    const std::string name(to_string(sc));

    const auto a = run_trial(c, obj), b = run_trial(c, obj);
    out.require(csv_string(a.records) == csv_string(b.records) && a.events == b.events, name + " reproducible");
    out.require(!a.events.empty(), name + " has schedule events");

    auto data_swapped = c;
    data_swapped.seeds.data += 1000;
    const auto d = run_trial(data_swapped, obj);
    out.require(d.events == a.events, name + " schedule independent of data seed");
    out.require(csv_string(d.records) != csv_string(a.records), name + " data seed matters");

    // Every index drawn must be the data stream's index for that (t, node),
    // whatever the schedule; crashed nodes simply stop drawing.
    auto expected_draws = [&](const SimState& s) {
      CounterStream data(c.seeds.data);
      std::vector<Eigen::Index> want;
      for (std::size_t t = 0; t + 1 < s.records.size(); ++t) {
        for (std::size_t j = 0; j < s.records[t].alive.size(); ++j) {
          if (s.records[t].alive[j]) {
            want.push_back(static_cast<Eigen::Index>(data.below(64, DrawTag::sample, {t, j})));
          }
        }
      }
      return want;
    };
    RecordingOracle ra{obj, {}}, rb{obj, {}};
    const auto sa = run_trial(c, ra);
    auto sched_swapped = c;
    sched_swapped.seeds.sched += 1000;
    const auto e = run_trial(sched_swapped, rb);
    out.require(ra.drawn == expected_draws(sa) && rb.drawn == expected_draws(e),
                name + " samples independent of sched seed");
    out.require(e.events != a.events, name + " sched seed matters");
  }
  out.detail << " crash_m2, omission, async_mp, elastic_var";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"1 identities", identities},
      {"2 contraction", contraction},
      {"3 consistency bounds", consistency_bounds},
      {"4 strongly convex rate", strongly_convex},
      {"5 non-convex rate shape", nonconvex_rate},
      {"6 adversarial lower bound", lower_bound},
      {"7 degeneracy matrix", degeneracy},
      {"8 determinism and obliviousness", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome out;
    try {
      fn(out);
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    std::printf("%s %s:%s\n", out.ok ? "PASS" : "FAIL", name.c_str(), out.detail.str().c_str());
    std::fflush(stdout);
    if (!out.ok) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
