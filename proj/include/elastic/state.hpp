#pragma once

// Run configuration, per-worker and global simulator state, schedule events and
// per-iteration records.

#include "elastic/compression.hpp"
#include "elastic/rng.hpp"
#include "elastic/types.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace elastic {

enum class Scheme {
  exact,
  crash_m2,
  crash_var,
  omission,
  async_mp,
  shared_mem,
  compress_ef,
  elastic_norm,
  elastic_var,
  adversarial,
};

inline constexpr Scheme kAllSchemes[] = {
    Scheme::exact,       Scheme::crash_m2,     Scheme::crash_var,   Scheme::omission,    Scheme::async_mp,
    Scheme::shared_mem,  Scheme::compress_ef,  Scheme::elastic_norm, Scheme::elastic_var, Scheme::adversarial,
};

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::exact: return "exact";
    case Scheme::crash_m2: return "crash_m2";
    case Scheme::crash_var: return "crash_var";
    case Scheme::omission: return "omission";
    case Scheme::async_mp: return "async_mp";
    case Scheme::shared_mem: return "shared_mem";
    case Scheme::compress_ef: return "compress_ef";
    case Scheme::elastic_norm: return "elastic_norm";
    case Scheme::elastic_var: return "elastic_var";
    case Scheme::adversarial: return "adversarial";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

enum class StepMode { single_step, parallel_step };

inline std::string_view to_string(StepMode m) { return m == StepMode::single_step ? "single_step" : "parallel_step"; }

inline StepMode parse_mode(std::string_view name) {
  if (name == "single_step" || name == "single") return StepMode::single_step;
  if (name == "parallel_step" || name == "parallel") return StepMode::parallel_step;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

/// Whether a scheme runs with the single-step update (one gradient per
/// iteration) or the parallel-step update (averaged over I_t).
inline std::optional<StepMode> required_mode(Scheme s) {
  switch (s) {
    case Scheme::exact: return std::nullopt;
    case Scheme::shared_mem:
    case Scheme::adversarial: return StepMode::single_step;
    default: return StepMode::parallel_step;
  }
}

enum class DelayMode { uniform, max };

enum class EventKind { crash, omit, delay, late };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::crash: return "crash";
    case EventKind::omit: return "omit";
    case EventKind::delay: return "delay";
    case EventKind::late: return "late";
  }
  return "unknown";
}

inline EventKind parse_event_kind(std::string_view name) {
  for (EventKind k : {EventKind::crash, EventKind::omit, EventKind::delay, EventKind::late}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown schedule event kind '" + std::string(name) + "'");
}

/// One schedule decision. For crash: `node` crashes at `t` and its last message
/// reaches only `targets`. For omit: the message of `node` at `t` to each target
/// is withheld for `delay` iterations (-1: never delivered). For delay: async
/// delivery after `delay` iterations. For late: elastic schedulers see `node`'s
/// message as late at each target.
struct ScheduleEvent {
  long t = 0;
  EventKind kind = EventKind::crash;
  int node = 0;
  std::vector<int> targets;
  long delay = 0;

  friend bool operator==(const ScheduleEvent&, const ScheduleEvent&) = default;
};

struct RelaxationConfig {
  Scheme scheme = Scheme::exact;
  int f = 0;            // fault budget: crashes, or withheld messages per receiver
  int tau_max = 0;      // maximum delay in iterations
  CompressorSpec compressor{};
  double beta = 1.0;    // elastic_norm threshold; 1 means wait for full receipt
  double b_adv = 0.0;   // adversarial offset magnitude

  // Random schedule parameters, drawn from the sched stream.
  double crash_prob = 0.0;    // per-(t, node) crash hazard while budget remains
  double late_prob = 0.0;     // per-(t, sender, receiver) lateness / omission
  double release_prob = 1.0;  // per-iteration delivery chance of a withheld message
  double drop_prob = 0.0;     // chance a withheld message is never delivered
  DelayMode delay_mode = DelayMode::uniform;

  /// Explicit schedule; replaces every random schedule draw when present.
  std::optional<std::vector<ScheduleEvent>> schedule;
};

enum class Theorem { T1, T2, T3, T4 };

inline std::string_view to_string(Theorem th) {
  switch (th) {
    case Theorem::T1: return "T1";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
    case Theorem::T4: return "T4";
  }
  return "T1";
}

inline Theorem parse_theorem(std::string_view name) {
  if (name == "T1") return Theorem::T1;
  if (name == "T2") return Theorem::T2;
  if (name == "T3") return Theorem::T3;
  if (name == "T4") return Theorem::T4;
  throw ConfigError("unknown theorem '" + std::string(name) + "'");
}

/// Learning rate: a fixed value, or the constant rate of a convergence theorem
/// resolved from (T, p, objective constants).
struct AlphaSpec {
  std::optional<double> value;
  std::optional<Theorem> theorem;

  static AlphaSpec fixed(double a) { return {a, std::nullopt}; }
  static AlphaSpec from(Theorem th) { return {std::nullopt, th}; }
};

struct MetricsOptions {
  bool values = true;             // f(x_t) and ||grad f(x_t)||^2
  bool gaps = true;               // ||x_t - v_t^i||^2
  bool keep_records = true;       // keep per-iteration records in memory
  bool check_bookkeeping = false; // compare x_t against the explicit sum every step
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t sched = 2;
};

struct RunConfig {
  int p = 1;
  long T = 1;
  AlphaSpec alpha = AlphaSpec::fixed(0.01);
  StepMode mode = StepMode::parallel_step;
  RelaxationConfig scheme{};
  Seeds seeds{};
  MetricsOptions metrics{};
};

struct PendingUpdate {
  long origin = 0;
  int sender = 0;
  long deliver_at = -1;  // -1: never
  ParamVector update;    // alpha * gradient; empty when never delivered
};

struct Substitution {
  int sender = 0;
  long origin = 0;
};

struct WorkerState {
  int id = 0;
  ParamVector view;
  ParamVector error_acc;
  std::vector<PendingUpdate> inbox;
  bool alive = true;
  std::vector<Substitution> last_substitutions;  // slots filled with the own update at t-1
  long substitutions_made = 0;
  long corrections_made = 0;
  long outstanding_withheld = 0;  // omission: messages to this worker not yet delivered
};

struct IterationRecord {
  long t = 0;
  double f_value = std::numeric_limits<double>::quiet_NaN();
  double grad_norm2 = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gap2;    // per worker; meaningful where alive[i]
  std::vector<char> alive;
  int participants = 0;        // |I_t|; 0 on the final record
  double dist2_to_opt = std::numeric_limits<double>::quiet_NaN();
};

struct RunSummary {
  double final_f = std::numeric_limits<double>::quiet_NaN();
  double final_dist2 = std::numeric_limits<double>::quiet_NaN();
  double min_grad_norm2 = std::numeric_limits<double>::infinity();
  double max_gap2 = 0.0;
  long region_excursions = 0;  // iterations with x_t outside the declared region
};

struct SchemeStats {
  long proceed_events = 0;        // elastic_norm: proceeded without stragglers
  long norm_condition_checks = 0; // elastic_norm: received-norm condition verified at proceed
  long max_backlog = 0;           // async_mp: largest inbox size observed
};

struct SimState {
  RunConfig config;
  double alpha = 0.0;
  long t = 0;
  Eigen::Index d = 0;
  ParamVector x;
  std::vector<WorkerState> workers;
  int crash_count = 0;
  long in_flight_omitted = 0;
  CounterStream data;
  CounterStream sched;

  Matrix gradients;       // d x p, raw gradients of iteration t
  Matrix updates;         // d x p, alpha * gradients of iteration t
  Matrix prev_updates;    // d x p, updates of iteration t-1
  ParamVector credited_gradient_sum;  // sum of gradients credited to x
  double credited_magnitude = 0.0;    // sum of max-norms of the x increments
  bool finished = false;
  std::vector<int> participants;      // I_t of the last step
  std::deque<ParamVector> history;    // shared_mem: x_t, x_{t-1}, ..., x_{t-tau}
  std::optional<Compressor> compressor;
  std::map<long, std::vector<ScheduleEvent>> plan;  // explicit schedule by iteration
  int next_actor = 0;

  std::vector<IterationRecord> records;
  std::vector<ScheduleEvent> events;  // realized schedule decisions
  RunSummary summary;
  SchemeStats stats;
  double region_radius2 = std::numeric_limits<double>::infinity();

  ParamVector scratch;  // per-receiver aggregation buffer
  ParamVector scratch_grad;

  int p() const noexcept { return config.p; }
  bool alive(int i) const { return workers[static_cast<std::size_t>(i)].alive; }
};

}  // namespace elastic
