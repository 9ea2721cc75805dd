// elastic_sim: run, sweep and check distributed-SGD consistency experiments.
//
// Exit codes: 0 ok, 1 a bound check failed, 2 configuration error,
// 3 scheme invariant violated.

#include "elastic/elastic.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using elastic::json;

namespace {

struct Overrides {
  // run
  std::optional<std::string> scheme, mode, alpha, compressor, delay_mode, schedule;
  std::optional<int> p, f, tau_max;
  std::optional<long> T;
  std::optional<double> beta, b_adv, crash_prob, late_prob, release_prob, drop_prob;
  // objective
  std::optional<std::string> objective;
  std::optional<long> d, m;
  std::optional<double> c, L, spread, center, amplitude, frequency, l2, region_radius;
  std::optional<std::uint64_t> obj_seed;
  // metrics
  bool no_values = false, no_gaps = false, check_bookkeeping = false;
  // sweep axes "key=v1,v2"
  std::vector<std::string> axes;
};

struct Globals {
  std::optional<std::uint64_t> seed_data, seed_sched;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::string config;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scheme", o.scheme, "Distribution scheme");
  cmd->add_option("--mode", o.mode, "single or parallel");
  cmd->add_option("--p", o.p, "Number of workers");
  cmd->add_option("--T", o.T, "Iterations");
  cmd->add_option("--alpha", o.alpha, "Learning rate, or T1..T4 for a theorem schedule");
  cmd->add_option("--f", o.f, "Fault budget");
  cmd->add_option("--tau-max", o.tau_max, "Maximum delay");
  cmd->add_option("--compressor", o.compressor, "identity, onebit or topk:K");
  cmd->add_option("--beta", o.beta, "Norm threshold of the elastic scheduler");
  cmd->add_option("--b-adv", o.b_adv, "Adversarial offset");
  cmd->add_option("--crash-prob", o.crash_prob);
  cmd->add_option("--late-prob", o.late_prob);
  cmd->add_option("--release-prob", o.release_prob);
  cmd->add_option("--drop-prob", o.drop_prob);
  cmd->add_option("--delay-mode", o.delay_mode, "uniform or max");
  cmd->add_option("--schedule", o.schedule, "JSON schedule file");
  cmd->add_option("--objective", o.objective, "quadratic, cosine_quadratic or logistic");
  cmd->add_option("--d", o.d);
  cmd->add_option("--m", o.m);
  cmd->add_option("--c", o.c);
  cmd->add_option("--L", o.L);
  cmd->add_option("--spread", o.spread);
  cmd->add_option("--center", o.center);
  cmd->add_option("--amplitude", o.amplitude);
  cmd->add_option("--frequency", o.frequency);
  cmd->add_option("--l2", o.l2);
  cmd->add_option("--region-radius", o.region_radius);
  cmd->add_option("--obj-seed", o.obj_seed);
  cmd->add_flag("--no-values", o.no_values, "Skip f and gradient-norm metrics");
  cmd->add_flag("--no-gaps", o.no_gaps, "Skip consistency-gap metrics");
  cmd->add_flag("--check-bookkeeping", o.check_bookkeeping);
}

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

json parse_axis_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

elastic::ExperimentConfig resolve(const Globals& g, const Overrides& o) {
  json j = g.config.empty() ? json::object() : elastic::read_json_file(g.config);
  auto& run = j["run"];
  if (run.is_null()) run = json::object();
  if (o.scheme && !o.mode) run.erase("mode");
  put(run, "scheme", o.scheme);
  put(run, "mode", o.mode);
  put(run, "p", o.p);
  put(run, "T", o.T);
  if (o.alpha) run["alpha"] = parse_axis_value(*o.alpha);
  put(run, "f", o.f);
  put(run, "tau_max", o.tau_max);
  put(run, "compressor", o.compressor);
  put(run, "beta", o.beta);
  put(run, "b_adv", o.b_adv);
  put(run, "crash_prob", o.crash_prob);
  put(run, "late_prob", o.late_prob);
  put(run, "release_prob", o.release_prob);
  put(run, "drop_prob", o.drop_prob);
  put(run, "delay_mode", o.delay_mode);
  if (o.schedule) {
    run.erase("schedule");
    run["schedule_file"] = fs::absolute(*o.schedule).string();
  }

  auto& obj = j["objective"];
  if (obj.is_null()) obj = json::object();
  put(obj, "kind", o.objective);
  put(obj, "d", o.d);
  put(obj, "m", o.m);
  put(obj, "c", o.c);
  put(obj, "L", o.L);
  put(obj, "spread", o.spread);
  put(obj, "center", o.center);
  put(obj, "amplitude", o.amplitude);
  put(obj, "frequency", o.frequency);
  put(obj, "l2", o.l2);
  put(obj, "region_radius", o.region_radius);
  put(obj, "seed", o.obj_seed);

  if (o.no_values) j["metrics"]["values"] = false;
  if (o.no_gaps) j["metrics"]["gaps"] = false;
  if (o.check_bookkeeping) j["metrics"]["check_bookkeeping"] = true;
  put(j["seeds"], "data", g.seed_data);
  put(j["seeds"], "sched", g.seed_sched);
  if (j["seeds"].is_null()) j.erase("seeds");
  put(j, "trials", g.trials);
  put(j, "out", g.out);

  for (const auto& spec : o.axes) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw elastic::ConfigError("axis must look like key=v1,v2,...");
    json values = json::array();
    std::string rest = spec.substr(eq + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      const auto comma = rest.find(',', start);
      const auto item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) values.push_back(parse_axis_value(item));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    j["sweep"][spec.substr(0, eq)] = values;
  }

  std::string base = ".";
  if (!g.config.empty()) base = fs::path(g.config).parent_path().string();
  if (base.empty()) base = ".";
  return elastic::experiment_from_json(j, base);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw elastic::ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw elastic::ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

int cmd_run(const elastic::ExperimentConfig& cfg) {
  const auto obj = elastic::build_objective(cfg.objective);
  const auto results = elastic::run_trials(cfg.run, obj, cfg.trials);
  const auto out = prepare_out(cfg.out);
  const std::string fp = elastic::hex(elastic::fingerprint(cfg));
  json summary{{"fingerprint", fp}, {"config", elastic::experiment_identity(cfg)}, {"trials", json::array()}};
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    write_file(out / ("trial_" + std::to_string(k) + ".csv"), elastic::csv_string(r.records));
    write_file(out / ("events_" + std::to_string(k) + ".json"), elastic::schedule_to_json(r.events).dump(1) + "\n");
    summary["trials"].push_back(elastic::summary_to_json(r, static_cast<int>(k)));
  }
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::printf("run %s: %d trial(s), alpha=%.6g, fingerprint %s -> %s\n",
              elastic::scheme_label(cfg.run.scheme).c_str(), cfg.trials, results.front().alpha, fp.c_str(),
              out.string().c_str());
  return 0;
}

int cmd_sweep(const elastic::ExperimentConfig& cfg) {
  const auto obj = elastic::build_objective(cfg.objective);
  const auto rows = elastic::sweep(cfg, obj);
  const auto out = prepare_out(cfg.out);
  std::ostringstream csv;
  elastic::write_sweep_csv(csv, rows, cfg.sweep);
  write_file(out / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_verify(const elastic::ExperimentConfig& cfg) {
  const auto obj = elastic::build_objective(cfg.objective);
  const auto out = prepare_out(cfg.out);
  json report{{"fingerprint", elastic::hex(elastic::fingerprint(cfg))}, {"rows", json::array()}};
  bool all_ok = true;
  std::printf("%-26s %12s %12s %8s  %s\n", "scheme", "B_theory", "B_empirical", "ratio", "status");
  for (const auto& cell : elastic::expand_cells(cfg)) {
    const auto row = elastic::verify_bound(cell.run, obj, cfg.trials, cfg.tol, cfg.se_factor);
    all_ok = all_ok && row.status != elastic::BoundStatus::fail;
    const std::string theory = row.theory.B ? elastic::format_number(*row.theory.B) : "n/a";
    const std::string ratio = std::isfinite(row.ratio) ? elastic::format_number(row.ratio) : "n/a";
    std::printf("%-26s %12.12s %12.6g %8.8s  %s%s%s\n", row.label.c_str(), theory.c_str(), row.B_empirical,
                ratio.c_str(), std::string(elastic::to_string(row.status)).c_str(), row.note.empty() ? "" : "  # ",
                row.note.c_str());
    report["rows"].push_back(elastic::bound_row_to_json(row));
  }
  write_file(out / "bounds.json", report.dump(2) + "\n");
  return all_ok ? 0 : 1;
}

int cmd_lower_bound(const elastic::ExperimentConfig& cfg) {
  const auto rows = elastic::lower_bound_table(cfg.lower_bound);
  const auto out = prepare_out(cfg.out);
  json report = json::array();
  std::printf("%8s %12s %12s\n", "B", "alpha", "iterations");
  for (const auto& r : rows) {
    const std::string iters =
        r.iterations ? std::to_string(*r.iterations) : ">" + std::to_string(cfg.lower_bound.cap);
    std::printf("%8.4g %12.6g %12s\n", r.B, r.alpha, iters.c_str());
    report.push_back({{"B", r.B},
                      {"alpha", r.alpha},
                      {"iterations", r.iterations ? json(*r.iterations) : json(nullptr)},
                      {"cap", cfg.lower_bound.cap}});
  }
  write_file(out / "lower_bound.json", report.dump(2) + "\n");
  return 0;
}

int cmd_dump(const elastic::ExperimentConfig& cfg, bool to_stdout) {
  const auto obj = elastic::build_objective(cfg.objective);
  const auto text = elastic::objective_dump(obj).dump(2) + "\n";
  if (to_stdout) {
    std::cout << text;
  } else {
    write_file(prepare_out(cfg.out) / "objective.json", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for distributed SGD under elastic consistency"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed-data", g.seed_data, "Base seed of the data stream");
  app.add_option("--seed-sched", g.seed_sched, "Base seed of the schedule stream");
  app.add_option("--trials", g.trials, "Number of seeded trials");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "JSON experiment config");

  Overrides o;
  auto* run = app.add_subcommand("run", "Run trials and write per-iteration CSV, events and a summary");
  auto* sweep = app.add_subcommand("sweep", "Cross product of parameter axes, one summary row per cell");
  auto* verify = app.add_subcommand("verify-bounds", "Compare measured consistency constants with the closed forms");
  auto* lower = app.add_subcommand("lower-bound", "Iterations to eps under the adversarial oracle, per B");
  auto* dump = app.add_subcommand("dump-objective", "Write the objective's samples and constants as JSON");
  for (auto* cmd : {run, sweep, verify, dump}) add_run_options(cmd, o);
  for (auto* cmd : {sweep, verify}) cmd->add_option("--axis", o.axes, "Sweep axis key=v1,v2,...");

  std::vector<double> b_list;
  std::optional<double> eps, alpha_min, alpha_max;
  std::optional<int> alpha_points;
  std::optional<long> cap;
  lower->add_option("--B", b_list, "Adversarial offsets")->delimiter(',');
  lower->add_option("--eps", eps);
  lower->add_option("--alpha-min", alpha_min);
  lower->add_option("--alpha-max", alpha_max);
  lower->add_option("--alpha-points", alpha_points);
  lower->add_option("--cap", cap);
  bool dump_stdout = false;
  dump->add_flag("--stdout", dump_stdout, "Print instead of writing objective.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto cfg = resolve(g, o);
    if (*run) return cmd_run(cfg);
    if (*sweep) return cmd_sweep(cfg);
    if (*verify) return cmd_verify(cfg);
    if (*lower) {
      auto& lb = cfg.lower_bound;
      if (!b_list.empty()) lb.b_values = b_list;
      if (eps) lb.eps = *eps;
      if (alpha_min) lb.alpha_min = *alpha_min;
      if (alpha_max) lb.alpha_max = *alpha_max;
      if (alpha_points) lb.alpha_points = *alpha_points;
      if (cap) lb.cap = *cap;
      return cmd_lower_bound(cfg);
    }
    if (*dump) return cmd_dump(cfg, dump_stdout);
  } catch (const elastic::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violated [%s]: %s\n", e.invariant().c_str(), e.what());
    return 3;
  } catch (const elastic::PreconditionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  return 2;
}
