#pragma once

// JSON configuration and schedule files, per-iteration CSV, event logs and
// the config fingerprint.

#include "elastic/objectives.hpp"
#include "elastic/state.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace elastic {

using json = nlohmann::json;

inline QuadraticSpec default_quadratic() {
  QuadraticSpec q;
  q.d = 10;
  q.m = 64;
  q.c = 0.5;
  q.L = 2.0;
  q.spread = 1.0;
  q.seed = 7;
  q.center = 1.0;
  return q;
}

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::quadratic;
  QuadraticSpec quadratic = default_quadratic();
  LogisticSpec logistic{};
};

struct SweepAxis {
  std::string key;
  std::vector<json> values;
};

struct LowerBoundConfig {
  std::vector<double> b_values{1.0, 2.0, 4.0, 8.0};
  double eps = 1e-3;
  double alpha_min = 1e-5;
  double alpha_max = 0.5;
  int alpha_points = 60;
  long cap = 200000;
};

struct ExperimentConfig {
  ObjectiveConfig objective{};
  RunConfig run{};
  int trials = 1;
  std::vector<SweepAxis> sweep;
  double tol = 0.05;
  double se_factor = 2.0;
  LowerBoundConfig lower_bound{};
  std::string out = "results";
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "quadratic") return ObjectiveKind::quadratic;
  if (s == "logistic") return ObjectiveKind::logistic;
  if (s == "cosine_quadratic") return ObjectiveKind::cosine_quadratic;
  throw ConfigError("unknown objective kind '" + s + "'");
}

inline std::string delay_mode_name(DelayMode m) { return m == DelayMode::max ? "max" : "uniform"; }

inline DelayMode parse_delay_mode(const std::string& s) {
  if (s == "uniform") return DelayMode::uniform;
  if (s == "max") return DelayMode::max;
  throw ConfigError("unknown delay mode '" + s + "'");
}

}  // namespace detail

inline json schedule_to_json(const std::vector<ScheduleEvent>& events) {
  json out = json::array();
  for (const auto& e : events) {
    out.push_back({{"t", e.t}, {"kind", std::string(to_string(e.kind))}, {"node", e.node}, {"targets", e.targets},
                   {"delay", e.delay}});
  }
  return out;
}

inline std::vector<ScheduleEvent> schedule_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("schedule must be a JSON array of events");
  std::vector<ScheduleEvent> out;
  for (const auto& item : j) {
    detail::reject_unknown(item, {"t", "kind", "node", "targets", "delay"}, "schedule event");
    if (!item.contains("t") || !item.contains("kind") || !item.contains("node")) {
      throw ConfigError("schedule event needs t, kind and node");
    }
    ScheduleEvent e;
    detail::read(item, "t", e.t);
    std::string kind;
    detail::read(item, "kind", kind);
    e.kind = parse_event_kind(kind);
    detail::read(item, "node", e.node);
    detail::read(item, "targets", e.targets);
    detail::read(item, "delay", e.delay);
    out.push_back(std::move(e));
  }
  return out;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

inline std::vector<ScheduleEvent> load_schedule(const std::string& path) { return schedule_from_json(read_json_file(path)); }

inline json objective_to_json(const ObjectiveConfig& o) {
  json j;
  j["kind"] = std::string(to_string(o.kind));
  if (o.kind == ObjectiveKind::logistic) {
    const auto& l = o.logistic;
    j.update({{"d", l.d}, {"m", l.m}, {"seed", l.seed}, {"l2", l.l2}, {"region_radius", l.region_radius}});
  } else {
    const auto& q = o.quadratic;
    j.update({{"d", q.d}, {"m", q.m}, {"c", q.c}, {"L", q.L}, {"spread", q.spread}, {"seed", q.seed}, {"center", q.center}});
    if (q.region_radius) j["region_radius"] = *q.region_radius;
    if (o.kind == ObjectiveKind::cosine_quadratic) j.update({{"amplitude", q.amplitude}, {"frequency", q.frequency}});
  }
  return j;
}

inline ObjectiveConfig objective_from_json(const json& j) {
  detail::reject_unknown(j, {"kind", "d", "m", "c", "L", "spread", "seed", "center", "region_radius", "amplitude",
                             "frequency", "l2"},
                         "objective");
  ObjectiveConfig o;
  std::string kind = "quadratic";
  detail::read(j, "kind", kind);
  o.kind = detail::parse_objective_kind(kind);
  if (o.kind == ObjectiveKind::logistic) {
    auto& l = o.logistic;
    detail::read(j, "d", l.d);
    detail::read(j, "m", l.m);
    detail::read(j, "seed", l.seed);
    detail::read(j, "l2", l.l2);
    detail::read(j, "region_radius", l.region_radius);
  } else {
    auto& q = o.quadratic;
    detail::read(j, "d", q.d);
    detail::read(j, "m", q.m);
    detail::read(j, "c", q.c);
    detail::read(j, "L", q.L);
    detail::read(j, "spread", q.spread);
    detail::read(j, "seed", q.seed);
    detail::read(j, "center", q.center);
    if (j.contains("region_radius")) {
      double r = 0.0;
      detail::read(j, "region_radius", r);
      q.region_radius = r;
    }
    detail::read(j, "amplitude", q.amplitude);
    detail::read(j, "frequency", q.frequency);
  }
  return o;
}

inline Objective build_objective(const ObjectiveConfig& o) {
  switch (o.kind) {
    case ObjectiveKind::quadratic: return make_quadratic(o.quadratic);
    case ObjectiveKind::cosine_quadratic: return make_cosine_quadratic(o.quadratic);
    case ObjectiveKind::logistic: return make_logistic(o.logistic);
  }
  return make_quadratic(o.quadratic);
}

inline json run_to_json(const RunConfig& r) {
  const auto& s = r.scheme;
  json j{{"p", r.p},
         {"T", r.T},
         {"mode", r.mode == StepMode::single_step ? "single" : "parallel"},
         {"scheme", std::string(to_string(s.scheme))},
         {"f", s.f},
         {"tau_max", s.tau_max},
         {"compressor", to_string(s.compressor)},
         {"beta", s.beta},
         {"b_adv", s.b_adv},
         {"crash_prob", s.crash_prob},
         {"late_prob", s.late_prob},
         {"release_prob", s.release_prob},
         {"drop_prob", s.drop_prob},
         {"delay_mode", detail::delay_mode_name(s.delay_mode)}};
  if (r.alpha.value) {
    j["alpha"] = *r.alpha.value;
  } else if (r.alpha.theorem) {
    j["alpha"] = std::string(to_string(*r.alpha.theorem));
  }
  if (s.schedule) j["schedule"] = schedule_to_json(*s.schedule);
  return j;
}

inline AlphaSpec parse_alpha(const json& v) {
  if (v.is_number()) return AlphaSpec::fixed(v.get<double>());
  if (v.is_string()) {
    const auto text = v.get<std::string>();
    if (!text.empty() && text[0] == 'T') return AlphaSpec::from(parse_theorem(text));
    try {
      std::size_t used = 0;
      const double a = std::stod(text, &used);
      if (used == text.size()) return AlphaSpec::fixed(a);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("alpha must be a number or one of T1, T2, T3, T4");
}

inline RunConfig run_from_json(const json& j, const std::string& base_dir = ".") {
  detail::reject_unknown(j, {"p", "T", "alpha", "mode", "scheme", "f", "tau_max", "compressor", "beta", "b_adv",
                             "crash_prob", "late_prob", "release_prob", "drop_prob", "delay_mode", "schedule",
                             "schedule_file"},
                         "run");
  RunConfig r;
  auto& s = r.scheme;
  detail::read(j, "p", r.p);
  detail::read(j, "T", r.T);
  if (j.contains("alpha")) r.alpha = parse_alpha(j.at("alpha"));
  if (j.contains("scheme")) s.scheme = parse_scheme(j.at("scheme").get<std::string>());
  r.mode = required_mode(s.scheme).value_or(StepMode::parallel_step);
  if (j.contains("mode")) r.mode = parse_mode(j.at("mode").get<std::string>());
  detail::read(j, "f", s.f);
  detail::read(j, "tau_max", s.tau_max);
  if (j.contains("compressor")) s.compressor = parse_compressor(j.at("compressor").get<std::string>());
  detail::read(j, "beta", s.beta);
  detail::read(j, "b_adv", s.b_adv);
  detail::read(j, "crash_prob", s.crash_prob);
  detail::read(j, "late_prob", s.late_prob);
  detail::read(j, "release_prob", s.release_prob);
  detail::read(j, "drop_prob", s.drop_prob);
  if (j.contains("delay_mode")) s.delay_mode = detail::parse_delay_mode(j.at("delay_mode").get<std::string>());
  if (j.contains("schedule")) s.schedule = schedule_from_json(j.at("schedule"));
  if (j.contains("schedule_file")) {
    const auto file = j.at("schedule_file").get<std::string>();
    s.schedule = load_schedule(file.starts_with("/") ? file : base_dir + "/" + file);
  }
  return r;
}

inline json experiment_to_json(const ExperimentConfig& c) {
  json j;
  j["objective"] = objective_to_json(c.objective);
  j["run"] = run_to_json(c.run);
  j["seeds"] = {{"data", c.run.seeds.data}, {"sched", c.run.seeds.sched}};
  j["metrics"] = {{"values", c.run.metrics.values},
                  {"gaps", c.run.metrics.gaps},
                  {"check_bookkeeping", c.run.metrics.check_bookkeeping}};
  j["trials"] = c.trials;
  json sweep = json::object();
  for (const auto& axis : c.sweep) sweep[axis.key] = axis.values;
  j["sweep"] = sweep;
  j["bounds"] = {{"tol", c.tol}, {"se_factor", c.se_factor}};
  const auto& lb = c.lower_bound;
  j["lower_bound"] = {{"B", lb.b_values},         {"eps", lb.eps},
                      {"alpha_min", lb.alpha_min}, {"alpha_max", lb.alpha_max},
                      {"alpha_points", lb.alpha_points}, {"cap", lb.cap}};
  j["out"] = c.out;
  return j;
}

inline const std::vector<std::string>& sweepable_keys() {
  static const std::vector<std::string> keys{"p", "T", "alpha", "scheme", "f", "tau_max", "compressor", "beta",
                                             "b_adv", "crash_prob", "late_prob", "release_prob", "drop_prob"};
  return keys;
}

inline ExperimentConfig experiment_from_json(const json& j, const std::string& base_dir = ".") {
  detail::reject_unknown(j, {"objective", "run", "seeds", "metrics", "trials", "sweep", "bounds", "lower_bound", "out"},
                         "config");
  ExperimentConfig c;
  if (j.contains("objective")) c.objective = objective_from_json(j.at("objective"));
  if (j.contains("run")) c.run = run_from_json(j.at("run"), base_dir);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::reject_unknown(s, {"data", "sched"}, "seeds");
    detail::read(s, "data", c.run.seeds.data);
    detail::read(s, "sched", c.run.seeds.sched);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::reject_unknown(m, {"values", "gaps", "check_bookkeeping"}, "metrics");
    detail::read(m, "values", c.run.metrics.values);
    detail::read(m, "gaps", c.run.metrics.gaps);
    detail::read(m, "check_bookkeeping", c.run.metrics.check_bookkeeping);
  }
  detail::read(j, "trials", c.trials);
  if (c.trials < 1) throw ConfigError("trials must be >= 1");
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    if (!s.is_object()) throw ConfigError("sweep must be an object of axis -> value list");
    for (const auto& [k, v] : s.items()) {
      if (std::find(sweepable_keys().begin(), sweepable_keys().end(), k) == sweepable_keys().end()) {
        throw ConfigError("unknown sweep axis '" + k + "'");
      }
      if (!v.is_array()) throw ConfigError("sweep axis '" + k + "' must be a list");
      if (v.empty()) throw ConfigError("sweep axis '" + k + "' is empty");
      c.sweep.push_back({k, std::vector<json>(v.begin(), v.end())});
    }
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    detail::reject_unknown(b, {"tol", "se_factor"}, "bounds");
    detail::read(b, "tol", c.tol);
    detail::read(b, "se_factor", c.se_factor);
  }
  if (j.contains("lower_bound")) {
    const auto& b = j.at("lower_bound");
    detail::reject_unknown(b, {"B", "eps", "alpha_min", "alpha_max", "alpha_points", "cap"}, "lower_bound");
    auto& lb = c.lower_bound;
    detail::read(b, "B", lb.b_values);
    detail::read(b, "eps", lb.eps);
    detail::read(b, "alpha_min", lb.alpha_min);
    detail::read(b, "alpha_max", lb.alpha_max);
    detail::read(b, "alpha_points", lb.alpha_points);
    detail::read(b, "cap", lb.cap);
  }
  detail::read(j, "out", c.out);
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return experiment_from_json(read_json_file(path), slash == std::string::npos ? "." : path.substr(0, slash));
}

/// The config without its output location.
inline json experiment_identity(const ExperimentConfig& c) {
  json j = experiment_to_json(c);
  j.erase("out");
  return j;
}

/// FNV-1a over the canonical JSON of the config (seeds included, output
/// directory excluded).
inline std::uint64_t fingerprint(const ExperimentConfig& c) {
  const std::string text = experiment_identity(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trip text for a double; NaN becomes an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
  out << "t,f_value,grad_norm2,gap2_min,gap2_max,gap2_mean,I_t_size,dist2_to_opt\n";
  for (const auto& r : records) {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = lo;
    double mean = lo;
    double sum = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < r.gap2.size(); ++i) {
      if (!r.alive[i]) continue;
      const double g = r.gap2[i];
      lo = n == 0 ? g : std::min(lo, g);
      hi = n == 0 ? g : std::max(hi, g);
      sum += g;
      ++n;
    }
    if (n > 0) mean = sum / static_cast<double>(n);
    out << r.t << ',' << format_number(r.f_value) << ',' << format_number(r.grad_norm2) << ',' << format_number(lo)
        << ',' << format_number(hi) << ',' << format_number(mean) << ',' << r.participants << ','
        << format_number(r.dist2_to_opt) << '\n';
  }
}

inline std::string csv_string(const std::vector<IterationRecord>& records) {
  std::ostringstream out;
  write_csv(out, records);
  return out.str();
}

inline json objective_dump(const Objective& obj) {
  const auto& k = obj.constants();
  json j;
  j["kind"] = std::string(to_string(obj.kind()));
  j["d"] = obj.dimension();
  j["m"] = obj.sample_count();
  j["constants"] = {{"L", k.L},           {"c", k.c},
                    {"sigma2", k.sigma2}, {"M2", k.M2},
                    {"f_star", k.f_star}, {"region_radius", k.region_radius},
                    {"estimated", k.estimated}};
  auto vec = [](const ParamVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto mat = [&](const Matrix& m) {
    json cols = json::array();
    for (Eigen::Index i = 0; i < m.cols(); ++i) cols.push_back(vec(m.col(i)));
    return cols;
  };
  j["optimum"] = obj.optimum() ? json(vec(*obj.optimum())) : json(nullptr);
  if (obj.kind() == ObjectiveKind::logistic) {
    j["features"] = mat(obj.features());
    j["labels"] = vec(obj.labels());
    j["l2"] = obj.l2();
  } else {
    j["hessian"] = mat(obj.hessian());
    j["spectrum"] = vec(obj.spectrum());
    j["centers"] = mat(obj.centers());
    if (obj.kind() == ObjectiveKind::cosine_quadratic) {
      j["amplitude"] = obj.amplitude();
      j["frequency"] = obj.frequency();
    }
  }
  return j;
}

}  // namespace elastic
