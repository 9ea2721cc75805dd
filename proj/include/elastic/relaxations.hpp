#pragma once

// Distribution schemes. Each one decides, for iteration t, which messages
// reach which views (parallel step) or how the acting worker's view is built
// (single step). All schedule decisions come from the sched stream keyed by
// (t, sender, receiver, ...) or from an explicit schedule.
//
// Messages carry u_j = alpha * g_j. A receiver's aggregate S_i is summed from
// zero: on-time messages in sender order, then late arrivals in inbox order,
// then corrections. Views move by v -= S_i / p, the same expression the kernel
// uses for x.

#include "elastic/oracle.hpp"
#include "elastic/state.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace elastic {

namespace detail {

inline std::uint64_t key(long v) { return static_cast<std::uint64_t>(v); }

inline const std::vector<ScheduleEvent>* planned(const SimState& s, long t) {
  const auto it = s.plan.find(t);
  return it == s.plan.end() ? nullptr : &it->second;
}

inline bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

/// Planned event of `kind` at t for (sender -> receiver), if any.
inline const ScheduleEvent* planned_for(const SimState& s, EventKind kind, int sender, int receiver) {
  const auto* events = planned(s, s.t);
  if (events == nullptr) return nullptr;
  for (const auto& e : *events) {
    if (e.kind == kind && e.node == sender && contains(e.targets, receiver)) return &e;
  }
  return nullptr;
}

inline void apply_aggregate(ParamVector& view, const ParamVector& sum, int p) {
  view.noalias() -= sum / static_cast<double>(p);
}

inline std::vector<int> alive_nodes(const SimState& s) {
  std::vector<int> out;
  for (int i = 0; i < s.p(); ++i) {
    if (s.alive(i)) out.push_back(i);
  }
  return out;
}

/// Logs one event per (sender, delay) group.
inline void log_grouped(SimState& s, EventKind kind, const std::map<std::pair<int, long>, std::vector<int>>& groups) {
  for (const auto& [k, targets] : groups) {
    s.events.push_back({s.t, kind, k.first, targets, k.second});
  }
}

/// Is the message (t, sender -> receiver) late for the elastic schedulers.
inline bool is_late(const SimState& s, int sender, int receiver) {
  if (s.config.scheme.schedule) return planned_for(s, EventKind::late, sender, receiver) != nullptr;
  const double q = s.config.scheme.late_prob;
  return q > 0.0 && s.sched.uniform(DrawTag::late, {key(s.t), key(sender), key(receiver)}) < q;
}

/// Adds inbox entries due at t to `sum` in insertion order and removes them.
/// Returns how many were delivered.
inline long deliver_due(SimState& s, WorkerState& w, ParamVector& sum) {
  long delivered = 0;
  auto keep = w.inbox.begin();
  for (auto it = w.inbox.begin(); it != w.inbox.end(); ++it) {
    if (it->deliver_at == s.t) {
      sum += it->update;
      ++delivered;
    } else {
      if (keep != it) *keep = std::move(*it);
      ++keep;
    }
  }
  w.inbox.erase(keep, w.inbox.end());
  return delivered;
}

struct CrashRound {
  std::vector<int> crashing;            // ascending
  std::vector<std::vector<int>> reach;  // per crashing node, ascending
  std::vector<char> is_crashing;
};

inline CrashRound draw_crashes(SimState& s) {
  const auto& cfg = s.config.scheme;
  CrashRound round;
  round.is_crashing.assign(static_cast<std::size_t>(s.p()), 0);

  if (cfg.schedule) {
    if (const auto* events = planned(s, s.t)) {
      for (const auto& e : *events) {
        if (e.kind != EventKind::crash) continue;
        if (!s.alive(e.node)) throw InvariantViolation("dead-node silence", "planned crash of already crashed node");
        if (round.is_crashing[static_cast<std::size_t>(e.node)]) continue;
        round.is_crashing[static_cast<std::size_t>(e.node)] = 1;
      }
    }
  } else if (cfg.crash_prob > 0.0) {
    int fresh = 0;
    for (int j = 0; j < s.p(); ++j) {
      if (!s.alive(j) || s.crash_count + fresh >= cfg.f) continue;
      if (s.sched.uniform(DrawTag::crash, {key(s.t), key(j)}) < cfg.crash_prob) {
        round.is_crashing[static_cast<std::size_t>(j)] = 1;
        ++fresh;
      }
    }
  }

  for (int j = 0; j < s.p(); ++j) {
    if (!round.is_crashing[static_cast<std::size_t>(j)]) continue;
    round.crashing.push_back(j);
    std::vector<int> reach;
    if (cfg.schedule) {
      for (const auto& e : *planned(s, s.t)) {
        if (e.kind != EventKind::crash || e.node != j) continue;
        for (int r : e.targets) {
          if (r < 0 || r >= s.p()) throw ConfigError("crash reach target out of range");
          if (s.alive(r) && !round.is_crashing[static_cast<std::size_t>(r)] && !contains(reach, r)) reach.push_back(r);
        }
      }
      std::sort(reach.begin(), reach.end());
    } else {
      for (int i = 0; i < s.p(); ++i) {
        if (!s.alive(i) || round.is_crashing[static_cast<std::size_t>(i)]) continue;
        if (s.sched.uniform(DrawTag::reach, {key(s.t), key(j), key(i)}) < 0.5) reach.push_back(i);
      }
    }
    round.reach.push_back(std::move(reach));
  }

  if (s.crash_count + static_cast<int>(round.crashing.size()) > cfg.f) {
    throw InvariantViolation("crash budget", "crash_count would exceed f = " + std::to_string(cfg.f));
  }
  return round;
}

inline void commit_crashes(SimState& s, const CrashRound& round) {
  for (std::size_t k = 0; k < round.crashing.size(); ++k) {
    const int j = round.crashing[k];
    s.workers[static_cast<std::size_t>(j)].alive = false;
    s.workers[static_cast<std::size_t>(j)].inbox.clear();
    s.events.push_back({s.t, EventKind::crash, j, round.reach[k], 0});
  }
  s.crash_count += static_cast<int>(round.crashing.size());
}

}  // namespace detail

/// Every alive view receives every alive update; I_t = alive nodes.
inline void advance_exact(SimState& s) {
  ParamVector& sum = s.scratch;
  sum.setZero();
  s.participants.clear();
  for (int j = 0; j < s.p(); ++j) {
    if (!s.alive(j)) continue;
    sum += s.updates.col(j);
    s.participants.push_back(j);
  }
  for (auto& w : s.workers) {
    if (w.alive) detail::apply_aggregate(w.view, sum, s.p());
  }
}

/// Crash faults: a node crashing during its broadcast reaches only its reach
/// set. I_t holds the nodes whose update reached at least one node.
inline void advance_crash_m2(SimState& s) {
  const auto round = detail::draw_crashes(s);
  ParamVector& sum = s.scratch;
  for (int i = 0; i < s.p(); ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive || round.is_crashing[static_cast<std::size_t>(i)]) continue;
    sum.setZero();
    for (int j = 0; j < s.p(); ++j) {
      if (!s.alive(j)) continue;
      if (round.is_crashing[static_cast<std::size_t>(j)]) {
        const auto k = static_cast<std::size_t>(std::lower_bound(round.crashing.begin(), round.crashing.end(), j) -
                                                round.crashing.begin());
        if (!detail::contains(round.reach[k], i)) continue;
      }
      sum += s.updates.col(j);
    }
    detail::apply_aggregate(w.view, sum, s.p());
  }

  s.participants.clear();
  for (int j = 0; j < s.p(); ++j) {
    if (!s.alive(j)) continue;
    if (round.is_crashing[static_cast<std::size_t>(j)]) {
      const auto k = static_cast<std::size_t>(std::lower_bound(round.crashing.begin(), round.crashing.end(), j) -
                                              round.crashing.begin());
      if (round.reach[k].empty()) continue;
    }
    s.participants.push_back(j);
  }
  detail::commit_crashes(s, round);
}

/// Crash faults with substitution: a receiver missed by a crashing sender
/// uses its own update in that slot. x credits every generated update.
inline void advance_crash_var(SimState& s) {
  const auto round = detail::draw_crashes(s);
  ParamVector& sum = s.scratch;
  for (int i = 0; i < s.p(); ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive || round.is_crashing[static_cast<std::size_t>(i)]) continue;
    sum.setZero();
    for (int j = 0; j < s.p(); ++j) {
      if (!s.alive(j)) continue;
      bool reached = true;
      if (round.is_crashing[static_cast<std::size_t>(j)]) {
        const auto k = static_cast<std::size_t>(std::lower_bound(round.crashing.begin(), round.crashing.end(), j) -
                                                round.crashing.begin());
        reached = detail::contains(round.reach[k], i);
      }
      if (reached) {
        sum += s.updates.col(j);
      } else {
        sum += s.updates.col(i);
        ++w.substitutions_made;
      }
    }
    detail::apply_aggregate(w.view, sum, s.p());
  }
  s.participants = detail::alive_nodes(s);
  detail::commit_crashes(s, round);
}

/// Message omission: each receiver has at most f messages outstanding
/// (permanently lost ones count forever). Withheld messages arrive after a
/// geometric delay or never.
inline void advance_omission(SimState& s) {
  const auto& cfg = s.config.scheme;
  const int p = s.p();
  std::map<std::pair<int, long>, std::vector<int>> groups;
  std::vector<char> held(static_cast<std::size_t>(p));
  ParamVector& sum = s.scratch;
  long widest = 0;

  for (int i = 0; i < p; ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive) continue;
    for (const auto& m : w.inbox) {
      if (m.deliver_at == s.t) --w.outstanding_withheld;
    }

    std::fill(held.begin(), held.end(), 0);
    for (int j = 0; j < p; ++j) {
      if (j == i || !s.alive(j)) continue;
      long delay = 0;
      if (cfg.schedule) {
        const auto* e = detail::planned_for(s, EventKind::omit, j, i);
        if (e == nullptr) continue;
        delay = e->delay < 0 ? -1 : e->delay;
        if (delay == 0) continue;
      } else {
        if (w.outstanding_withheld >= cfg.f || cfg.late_prob <= 0.0) continue;
        const auto kt = detail::key(s.t);
        if (s.sched.uniform(DrawTag::late, {kt, detail::key(j), detail::key(i)}) >= cfg.late_prob) continue;
        if (cfg.drop_prob > 0.0 && s.sched.uniform(DrawTag::drop, {kt, detail::key(j), detail::key(i)}) < cfg.drop_prob) {
          delay = -1;
        } else {
          delay = 1;
          while (s.sched.uniform(DrawTag::release, {kt, detail::key(j), detail::key(i), detail::key(delay)}) >=
                 cfg.release_prob) {
            ++delay;
          }
        }
      }
      if (w.outstanding_withheld >= cfg.f) {
        throw InvariantViolation("omission budget", "receiver " + std::to_string(i) + " would exceed f = " +
                                                        std::to_string(cfg.f) + " withheld messages");
      }
      ++w.outstanding_withheld;
      held[static_cast<std::size_t>(j)] = 1;
      if (delay > 0) w.inbox.push_back({s.t, j, s.t + delay, s.updates.col(j)});
      groups[{j, delay}].push_back(i);
    }

    sum.setZero();
    for (int j = 0; j < p; ++j) {
      if (s.alive(j) && !held[static_cast<std::size_t>(j)]) sum += s.updates.col(j);
    }
    detail::deliver_due(s, w, sum);
    detail::apply_aggregate(w.view, sum, p);
    widest = std::max(widest, w.outstanding_withheld);
  }

  s.in_flight_omitted = widest;
  detail::log_grouped(s, EventKind::omit, groups);
  s.participants = detail::alive_nodes(s);
}

/// Bounded asynchrony: each message is delayed by 0..tau_max iterations.
inline void advance_async_mp(SimState& s) {
  const auto& cfg = s.config.scheme;
  const int p = s.p();
  const long tau = cfg.tau_max;
  std::map<std::pair<int, long>, std::vector<int>> groups;
  ParamVector& sum = s.scratch;

  for (int i = 0; i < p; ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive) continue;
    sum.setZero();
    for (int j = 0; j < p; ++j) {
      if (!s.alive(j)) continue;
      long delay = 0;
      if (j != i) {
        if (cfg.schedule) {
          if (const auto* e = detail::planned_for(s, EventKind::delay, j, i)) delay = e->delay;
        } else if (cfg.delay_mode == DelayMode::max) {
          delay = tau;
        } else if (tau > 0) {
          delay = static_cast<long>(
              s.sched.below(static_cast<std::uint64_t>(tau + 1), DrawTag::delay,
                            {detail::key(s.t), detail::key(j), detail::key(i)}));
        }
      }
      if (delay < 0 || delay > tau) {
        throw InvariantViolation("delay bound", "delay " + std::to_string(delay) + " outside [0, tau_max]");
      }
      if (delay == 0) {
        sum += s.updates.col(j);
      } else {
        w.inbox.push_back({s.t, j, s.t + delay, s.updates.col(j)});
        groups[{j, delay}].push_back(i);
      }
    }
    detail::deliver_due(s, w, sum);
    detail::apply_aggregate(w.view, sum, p);

    const long backlog = static_cast<long>(w.inbox.size());
    s.stats.max_backlog = std::max(s.stats.max_backlog, backlog);
    if (backlog > (p - 1) * tau) {
      throw InvariantViolation("async backlog", "inbox of node " + std::to_string(i) + " exceeds (p-1) tau_max");
    }
  }
  detail::log_grouped(s, EventKind::delay, groups);
  s.participants = detail::alive_nodes(s);
}

/// Error feedback: node i broadcasts Q(eps_i + u_i) and keeps the residual.
inline void advance_compress_ef(SimState& s) {
  const int p = s.p();
  const Compressor& q = *s.compressor;
  ParamVector& sum = s.scratch;
  sum.setZero();
  for (int j = 0; j < p; ++j) {
    auto& w = s.workers[static_cast<std::size_t>(j)];
    if (!w.alive) continue;
    ParamVector wvec = w.error_acc + s.updates.col(j);
    ParamVector payload = q(wvec);
    w.error_acc = wvec - payload;
    sum += payload;
  }
  for (auto& w : s.workers) {
    if (w.alive) detail::apply_aggregate(w.view, sum, p);
  }
  s.participants = detail::alive_nodes(s);
}

/// Norm-bounded elastic scheduler. A receiver with late senders proceeds when
/// the norm of the updates received from others is at least beta times the
/// norm of its own; stragglers then arrive one iteration later. Otherwise it
/// waits for every message. beta = 1 always waits.
inline void advance_elastic_norm(SimState& s) {
  const auto& cfg = s.config.scheme;
  const int p = s.p();
  std::map<std::pair<int, long>, std::vector<int>> groups;
  std::vector<char> late(static_cast<std::size_t>(p));
  ParamVector& sum = s.scratch;
  ParamVector& received = s.scratch_grad;

  for (int i = 0; i < p; ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive) continue;
    bool any_late = false;
    for (int j = 0; j < p; ++j) {
      const bool l = j != i && s.alive(j) && detail::is_late(s, j, i);
      late[static_cast<std::size_t>(j)] = l ? 1 : 0;
      any_late = any_late || l;
    }

    bool proceed = false;
    if (any_late && cfg.beta < 1.0) {
      received.setZero();
      for (int j = 0; j < p; ++j) {
        if (j != i && s.alive(j) && !late[static_cast<std::size_t>(j)]) received += s.updates.col(j);
      }
      proceed = received.norm() >= cfg.beta * s.updates.col(i).norm();
    }

    sum.setZero();
    if (proceed) {
      ++s.stats.proceed_events;
      for (int j = 0; j < p; ++j) {
        if (!s.alive(j)) continue;
        if (late[static_cast<std::size_t>(j)]) {
          w.inbox.push_back({s.t, j, s.t + 1, s.updates.col(j)});
          groups[{j, 1}].push_back(i);
        } else {
          sum += s.updates.col(j);
        }
      }
      if (received.norm() < cfg.beta * s.updates.col(i).norm()) {
        throw InvariantViolation("elastic norm condition", "proceeded below the beta threshold");
      }
      ++s.stats.norm_condition_checks;
    } else {
      for (int j = 0; j < p; ++j) {
        if (s.alive(j)) sum += s.updates.col(j);
      }
    }
    detail::deliver_due(s, w, sum);
    detail::apply_aggregate(w.view, sum, p);
    for (const auto& m : w.inbox) {
      if (m.deliver_at > s.t + 1) throw InvariantViolation("elastic lateness", "message more than one iteration late");
    }
  }
  detail::log_grouped(s, EventKind::late, groups);
  s.participants = detail::alive_nodes(s);
}

/// Variance-bounded elastic scheduler: a late sender's slot is filled with the
/// receiver's own update and corrected by (u_j - u_i) one iteration later.
inline void advance_elastic_var(SimState& s) {
  const int p = s.p();
  std::map<std::pair<int, long>, std::vector<int>> groups;
  ParamVector& sum = s.scratch;

  for (int i = 0; i < p; ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive) continue;
    std::vector<Substitution> fresh;
    sum.setZero();
    for (int j = 0; j < p; ++j) {
      if (!s.alive(j)) continue;
      if (j != i && detail::is_late(s, j, i)) {
        sum += s.updates.col(i);
        fresh.push_back({j, s.t});
        groups[{j, 1}].push_back(i);
        ++w.substitutions_made;
      } else {
        sum += s.updates.col(j);
      }
    }
    for (const auto& sub : w.last_substitutions) {
      if (sub.origin != s.t - 1) throw InvariantViolation("elastic lateness", "correction older than one iteration");
      sum += s.prev_updates.col(sub.sender);
      sum -= s.prev_updates.col(i);
      ++w.corrections_made;
    }
    detail::apply_aggregate(w.view, sum, p);
    w.last_substitutions = std::move(fresh);
  }
  detail::log_grouped(s, EventKind::late, groups);
  s.participants = detail::alive_nodes(s);
}

/// Shared memory, single step: every worker's view takes coordinate k from
/// x_{t - delta} with delta in 0..min(tau_max, t) per (t, worker, k).
inline void prepare_shared_mem(SimState& s) {
  const auto& cfg = s.config.scheme;
  const long reach = std::min<long>(cfg.tau_max, static_cast<long>(s.history.size()) - 1);
  for (int i = 0; i < s.p(); ++i) {
    auto& w = s.workers[static_cast<std::size_t>(i)];
    if (!w.alive) continue;
    for (Eigen::Index k = 0; k < s.d; ++k) {
      long delta = 0;
      if (cfg.delay_mode == DelayMode::max) {
        delta = reach;
      } else if (reach > 0) {
        delta = static_cast<long>(s.sched.below(static_cast<std::uint64_t>(reach + 1), DrawTag::coordinate,
                                                {detail::key(s.t), detail::key(i), static_cast<std::uint64_t>(k)}));
      }
      w.view[k] = s.history[static_cast<std::size_t>(delta)][k];
    }
  }
}

/// Adversarial oracle: every view is x + alpha * B_adv * (+-e_1), choosing the
/// sign that pushes x_{t+1} furthest from x*. Ties go to +.
template <GradientOracle O>
void prepare_adversarial(SimState& s, const O& obj) {
  const auto& opt = obj.optimum();
  if (!opt) throw ConfigError("adversarial scheme needs an objective with a known optimum");
  const double offset = s.alpha * s.config.scheme.b_adv;
  ParamVector& g = s.scratch_grad;
  double best = -1.0;
  double chosen = 1.0;
  for (double sign : {1.0, -1.0}) {
    ParamVector v = s.x;
    v[0] += sign * offset;
    obj.full_gradient(v, g);
    const double dist = (s.x - s.alpha * g - *opt).squaredNorm();
    if (dist > best) {
      best = dist;
      chosen = sign;
    }
  }
  for (auto& w : s.workers) {
    if (!w.alive) continue;
    w.view = s.x;
    w.view[0] += chosen * offset;
  }
}

/// Builds views for single-step schemes before gradients are taken.
template <GradientOracle O>
void prepare_views(SimState& s, const O& obj) {
  if (s.config.mode != StepMode::single_step) return;
  switch (s.config.scheme.scheme) {
    case Scheme::shared_mem: prepare_shared_mem(s); break;
    case Scheme::adversarial: prepare_adversarial(s, obj); break;
    default:
      for (auto& w : s.workers) {
        if (w.alive) w.view = s.x;
      }
  }
}

/// Delivers iteration t's updates to the views (parallel step) and sets I_t.
inline void deliver(SimState& s) {
  switch (s.config.scheme.scheme) {
    case Scheme::exact: advance_exact(s); break;
    case Scheme::crash_m2: advance_crash_m2(s); break;
    case Scheme::crash_var: advance_crash_var(s); break;
    case Scheme::omission: advance_omission(s); break;
    case Scheme::async_mp: advance_async_mp(s); break;
    case Scheme::compress_ef: advance_compress_ef(s); break;
    case Scheme::elastic_norm: advance_elastic_norm(s); break;
    case Scheme::elastic_var: advance_elastic_var(s); break;
    case Scheme::shared_mem:
    case Scheme::adversarial: throw ConfigError(std::string(to_string(s.config.scheme.scheme)) + " is single-step only");
  }
}

}  // namespace elastic
