#pragma once

// Experiment orchestration: kicked vs unkicked comparison, single-arm runs
// and kicked-top sweeps, with CSV series, a JSON summary and a text log
// written atomically into the output directory.

#include "serfkick/config.hpp"
#include "serfkick/kicked_top.hpp"
#include "serfkick/metrology.hpp"
#include "serfkick/propagator.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace serfkick::scenarios {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSummarySchemaVersion = 1;
inline constexpr const char* kSeriesHeader =
    "time,qfi,qfi_rescaled,fisher_sz,fisher_sz_rescaled,delta_b_optimal,delta_b_sz,scenario";
inline constexpr const char* kSweepHeader = "f,alpha,k,n,qfi_alpha";
/// Relative change of the maximum rescaled QFI accepted by the convergence checks.
inline constexpr double kConvergenceTolerance = 0.01;

// --- worker pool ------------------------------------------------------------

/// Runs independent tasks on up to `workers` threads. Results are stored by
/// task index, so the outcome does not depend on scheduling. The first
/// exception (lowest task index) is rethrown after all workers stop.
template <class T>
std::vector<T> run_tasks(const std::vector<std::function<T()>>& tasks, int workers) {
  std::vector<std::optional<T>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::size_t next = 0;
  std::mutex m;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(m);
        if (next >= tasks.size()) return;
        i = next++;
      }
      try {
        results[i].emplace(tasks[i]());
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, workers));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(n, tasks.size()); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(tasks.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

// --- trajectories -------------------------------------------------------------

struct TrajectoryRun {
  dynamics::EvolutionResult result;
  std::string log;
};

/// One trajectory of the configured magnetometer at field `b_field`.
inline TrajectoryRun run_trajectory(const config::ExperimentConfig& c, bool kicks, double b_field,
                                    const std::string& label) {
  auto params = c.params;
  auto schedule = c.schedule;
  params.b_field = b_field;
  schedule.kicks_enabled = kicks;
  const dynamics::Propagator prop(dynamics::MasterEquation(params, schedule));
  std::ostringstream log;
  log.precision(10);
  log << "# trajectory " << label << " B=" << b_field << " T\n# t trace-1 min_eig Sx Sy Sz Fx Fy Fz\n";
  dynamics::EvolveOptions opt;
  opt.snapshot_stride = c.snapshot_stride;
  opt.log = &log;
  opt.log_stride = c.snapshot_stride;
  TrajectoryRun run{prop.evolve(dynamics::thermal_state(params.polarization_q), c.total_time, opt), {}};
  run.result.trajectory.params_tag = config::fingerprint(c) + ":" + label;
  run.log = log.str();
  return run;
}

struct TraceStats {
  double max_trace_drift = 0.0;
  double cumulative_trace_correction = 0.0;
  double max_hermiticity_drift = 0.0;
  double min_eigenvalue = 1.0;
  long long steps = 0;

  void merge(const dynamics::TrajectoryDiagnostics& d) {
    max_trace_drift = std::max(max_trace_drift, d.max_trace_drift);
    cumulative_trace_correction = std::max(cumulative_trace_correction, d.cumulative_trace_correction);
    max_hermiticity_drift = std::max(max_hermiticity_drift, d.max_hermiticity_drift);
    min_eigenvalue = std::min(min_eigenvalue, d.min_eigenvalue);
    steps += d.steps;
  }
};

struct ArmResult {
  std::string name;
  metrology::PrecisionSeries series;
  TraceStats trace;
  std::vector<StateTrajectory> trajectories;  ///< B - delta, B, B + delta
};

struct FieldPlan {
  bool kicks;
  double b_field;
  std::string label;
};

inline ArmResult assemble_arm(const std::string& name, std::vector<TrajectoryRun> runs, double delta,
                              double n_atoms) {
  ArmResult arm;
  arm.name = name;
  for (auto& r : runs) {
    arm.trace.merge(r.result.diagnostics);
    arm.trajectories.push_back(std::move(r.result.trajectory));
  }
  arm.series = metrology::precision_series({&arm.trajectories[0], &arm.trajectories[1], &arm.trajectories[2]},
                                           metrology::sz_povm(), n_atoms, delta);
  return arm;
}

/// Improvement of Delta B at each curve's own optimum: 1 - sqrt(I_ref / I).
inline double improvement(double reference_max, double candidate_max) {
  return 1.0 - std::sqrt(reference_max / candidate_max);
}

struct CompareResult {
  ArmResult unkicked;
  ArmResult kicked;
  double improvement_optimal = 0.0;
  double improvement_sz = 0.0;
};

struct ConvergenceCheck {
  std::string name;
  double unkicked_change = 0.0;  ///< relative change of max rescaled QFI
  double kicked_change = 0.0;
  double improvement_optimal = 0.0;
  double improvement_sz = 0.0;
  bool passed = false;
};

struct RunOutcome {
  config::Scenario scenario;
  std::vector<ArmResult> arms;
  std::optional<double> improvement_optimal;
  std::optional<double> improvement_sz;
  std::vector<ConvergenceCheck> convergence;
  bool convergence_requested = false;
  std::vector<std::string> warnings;
  std::string log;
};

/// Error if the unkicked rescaled-QFI maximum sits on the last snapshot.
inline void require_bracketed(const metrology::PrecisionSeries& s) {
  const auto m = s.max_qfi_rescaled();
  if (s.size() < 3 || m.index + 1 == s.size() || m.index == 0) {
    throw NumericalError("unkicked rescaled QFI maximum is not bracketed by the run (argmax t = " +
                         std::to_string(m.time) + " s); increase total_time_s or reduce snapshot_stride");
  }
}

/// The S_z Fisher curve is not required to turn over inside the run, but a
/// maximum on the last snapshot only bounds the true optimum from below.
inline void note_unbracketed_fisher(const ArmResult& a, std::vector<std::string>& warnings) {
  const auto m = a.series.max_fisher_rescaled();
  if (a.series.size() > 0 && m.index + 1 == a.series.size()) {
    warnings.push_back(a.name + " rescaled S_z Fisher information is maximal at the final snapshot (t = " +
                       std::to_string(m.time) + " s); its optimum lies beyond the run");
  }
}

inline std::vector<FieldPlan> field_plan(const config::ExperimentConfig& c, bool kicks, double delta,
                                         const std::string& arm) {
  const double b = c.params.b_field;
  return {{kicks, b - delta, arm + "/B-d"}, {kicks, b, arm + "/B"}, {kicks, b + delta, arm + "/B+d"}};
}

inline std::vector<TrajectoryRun> run_plan(const config::ExperimentConfig& c, const std::vector<FieldPlan>& plan) {
  std::vector<std::function<TrajectoryRun()>> tasks;
  for (const auto& p : plan) tasks.emplace_back([&c, p] { return run_trajectory(c, p.kicks, p.b_field, p.label); });
  return run_tasks(tasks, c.worker_count);
}

inline CompareResult compare_from_runs(const config::ExperimentConfig& c, std::vector<TrajectoryRun> runs,
                                       double delta) {
  std::vector<TrajectoryRun> u(std::make_move_iterator(runs.begin()), std::make_move_iterator(runs.begin() + 3));
  std::vector<TrajectoryRun> k(std::make_move_iterator(runs.begin() + 3), std::make_move_iterator(runs.end()));
  CompareResult r{assemble_arm("unkicked", std::move(u), delta, c.n_atoms()),
                  assemble_arm("kicked", std::move(k), delta, c.n_atoms())};
  r.improvement_optimal =
      improvement(r.unkicked.series.max_qfi_rescaled().value, r.kicked.series.max_qfi_rescaled().value);
  r.improvement_sz =
      improvement(r.unkicked.series.max_fisher_rescaled().value, r.kicked.series.max_fisher_rescaled().value);
  return r;
}

/// Six trajectories: both arms at B - delta, B, B + delta. The comparison
/// arm has kicks disabled; the kicked arm follows the configured flag.
inline CompareResult run_compare(const config::ExperimentConfig& c, std::string* log = nullptr) {
  const double delta = c.fd_delta();
  auto plan = field_plan(c, false, delta, "unkicked");
  for (auto& p : field_plan(c, c.schedule.kicks_enabled, delta, "kicked")) plan.push_back(p);
  auto runs = run_plan(c, plan);
  if (log != nullptr)
    for (const auto& r : runs) *log += r.log;
  return compare_from_runs(c, std::move(runs), delta);
}

inline double relative_change(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline ConvergenceCheck convergence_check(const std::string& name, const CompareResult& base,
                                          const CompareResult& variant) {
  ConvergenceCheck chk;
  chk.name = name;
  chk.unkicked_change = relative_change(variant.unkicked.series.max_qfi_rescaled().value,
                                        base.unkicked.series.max_qfi_rescaled().value);
  chk.kicked_change =
      relative_change(variant.kicked.series.max_qfi_rescaled().value, base.kicked.series.max_qfi_rescaled().value);
  chk.improvement_optimal = variant.improvement_optimal;
  chk.improvement_sz = variant.improvement_sz;
  chk.passed = chk.unkicked_change < kConvergenceTolerance && chk.kicked_change < kConvergenceTolerance;
  return chk;
}

/// Halved time steps, halved finite-difference step and doubled Doppler
/// nodes, each compared against the baseline. Trajectories that a variant
/// leaves unchanged are reused (the unkicked arm never sees the Doppler grid).
inline std::vector<ConvergenceCheck> run_convergence(const config::ExperimentConfig& c, const CompareResult& base) {
  const double delta = c.fd_delta();
  const double half = 0.5 * delta;
  const double b = c.params.b_field;

  auto fine = c;
  fine.params.dt_free *= 0.5;
  fine.params.dt_pulse *= 0.5;
  auto doppler = c;
  doppler.params.doppler_points *= 2;

  struct Job {
    const config::ExperimentConfig* cfg;
    FieldPlan plan;
  };
  std::vector<Job> jobs;
  for (bool kicks : {false, c.schedule.kicks_enabled}) {
    const std::string arm = kicks ? "kicked" : "unkicked";
    jobs.push_back({&c, {kicks, b - half, arm + "/B-d/2"}});
    jobs.push_back({&c, {kicks, b + half, arm + "/B+d/2"}});
  }
  for (const auto& p : field_plan(fine, false, delta, "unkicked/fine")) jobs.push_back({&fine, p});
  for (const auto& p : field_plan(fine, c.schedule.kicks_enabled, delta, "kicked/fine")) jobs.push_back({&fine, p});
  for (const auto& p : field_plan(doppler, c.schedule.kicks_enabled, delta, "kicked/doppler"))
    jobs.push_back({&doppler, p});

  std::vector<std::function<TrajectoryRun()>> tasks;
  for (const auto& j : jobs)
    tasks.emplace_back([j] { return run_trajectory(*j.cfg, j.plan.kicks, j.plan.b_field, j.plan.label); });
  auto runs = run_tasks(tasks, c.worker_count);

  auto copy_run = [](const StateTrajectory& t) {
    TrajectoryRun r;
    r.result.trajectory = t;
    return r;
  };
  std::vector<ConvergenceCheck> out;
  {
    // delta halving: reuse the centre trajectories
    std::vector<TrajectoryRun> v;
    v.push_back(std::move(runs[0]));
    v.push_back(copy_run(base.unkicked.trajectories[1]));
    v.push_back(std::move(runs[1]));
    v.push_back(std::move(runs[2]));
    v.push_back(copy_run(base.kicked.trajectories[1]));
    v.push_back(std::move(runs[3]));
    out.push_back(convergence_check("fd_delta_halved", base, compare_from_runs(c, std::move(v), half)));
  }
  {
    std::vector<TrajectoryRun> v(std::make_move_iterator(runs.begin() + 4), std::make_move_iterator(runs.begin() + 10));
    out.push_back(convergence_check("dt_halved", base, compare_from_runs(fine, std::move(v), delta)));
  }
  {
    std::vector<TrajectoryRun> v;
    for (int i = 0; i < 3; ++i) v.push_back(copy_run(base.unkicked.trajectories[static_cast<std::size_t>(i)]));
    for (std::size_t i = 10; i < 13; ++i) v.push_back(std::move(runs[i]));
    out.push_back(convergence_check("doppler_nodes_doubled", base, compare_from_runs(doppler, std::move(v), delta)));
  }
  return out;
}

inline ArmResult run_single(const config::ExperimentConfig& c, std::string* log = nullptr) {
  const double delta = c.fd_delta();
  const std::string name = c.schedule.kicks_enabled ? "kicked" : "unkicked";
  auto runs = run_plan(c, field_plan(c, c.schedule.kicks_enabled, delta, name));
  if (log != nullptr)
    for (const auto& r : runs) *log += r.log;
  return assemble_arm(name, std::move(runs), delta, c.n_atoms());
}

// --- kicked top sweep -----------------------------------------------------------

struct SweepRow {
  double f, alpha, k;
  int n;
  double qfi_alpha;
};

/// alpha-QFI of the stroboscopically evolved coherent state for every
/// (alpha, k, n) on the configured grid.
inline std::vector<SweepRow> run_kicked_top_sweep(const config::ExperimentConfig& c) {
  const auto& s = c.kicked_top;
  const HalfInt f = HalfInt::from_double(s.f);
  const VectorC psi0 = kickedtop::coherent_state(f, s.theta, s.phi);
  std::vector<std::function<std::vector<SweepRow>()>> tasks;
  for (double alpha : s.alpha) {
    for (double k : s.k) {
      tasks.emplace_back([&, alpha, k] {
        std::vector<SweepRow> rows;
        for (int n : s.steps) {
          auto state = [&](double a) {
            return MatrixC(projector(kickedtop::evolve_stroboscopic(psi0, {f, a, k, 1.0}, n)));
          };
          const metrology::StateTriple t{state(alpha - s.delta), state(alpha), state(alpha + s.delta)};
          rows.push_back({s.f, alpha, k, n, metrology::qfi(t, s.delta)});
        }
        return rows;
      });
    }
  }
  std::vector<SweepRow> out;
  for (auto& block : run_tasks(tasks, c.worker_count)) out.insert(out.end(), block.begin(), block.end());
  return out;
}

// --- output ---------------------------------------------------------------

inline std::string format_number(double v) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in output series");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline void append_series_csv(std::string& out, const metrology::PrecisionSeries& s, const std::string& name) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_number(s.times[i]) + ',' + format_number(s.qfi[i]) + ',' + format_number(s.qfi_rescaled[i]) + ',' +
           format_number(s.fisher_sz[i]) + ',' + format_number(s.fisher_sz_rescaled[i]) + ',' +
           format_number(s.delta_b_optimal[i]) + ',' + format_number(s.delta_b_sz[i]) + ',' + name + "\r\n";
  }
}

inline std::string series_csv(const std::vector<ArmResult>& arms) {
  std::string out = std::string(kSeriesHeader) + "\r\n";
  for (const auto& a : arms) append_series_csv(out, a.series, a.name);
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\r\n";
  for (const auto& r : rows) {
    out += format_number(r.f) + ',' + format_number(r.alpha) + ',' + format_number(r.k) + ',' + std::to_string(r.n) +
           ',' + format_number(r.qfi_alpha) + "\r\n";
  }
  return out;
}

inline config::json arm_json(const ArmResult& a, double n_atoms) {
  const auto q = a.series.max_qfi_rescaled();
  const auto f = a.series.max_fisher_rescaled();
  config::json j;
  j["snapshots"] = a.series.size();
  j["max_qfi_rescaled"] = q.value;
  j["argmax_qfi_rescaled_s"] = q.time;
  j["max_fisher_sz_rescaled"] = f.value;
  j["argmax_fisher_sz_rescaled_s"] = f.time;
  j["best_delta_b_optimal"] = metrology::delta_b(q.value, n_atoms);
  j["best_delta_b_sz"] = metrology::delta_b(f.value, n_atoms);
  j["excluded_outcomes"] = a.series.excluded_outcomes;
  j["trace"] = {{"max_drift", a.trace.max_trace_drift},
                {"cumulative_correction", a.trace.cumulative_trace_correction},
                {"max_hermiticity_drift", a.trace.max_hermiticity_drift},
                {"min_eigenvalue", a.trace.min_eigenvalue},
                {"euler_steps", a.trace.steps}};
  return j;
}

/// Summary document. Contains no timestamps or host data, so identical
/// inputs give identical bytes.
inline config::json emit_summary(const RunOutcome& r, const config::ExperimentConfig& c) {
  config::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["tool"] = "serfkick";
  j["tool_version"] = kToolVersion;
  j["scenario"] = config::scenario_name(r.scenario);
  j["config_fingerprint"] = config::fingerprint(c);
  j["config"] = config::to_json(c);
  if (r.scenario == config::Scenario::KickedTopSweep) {
    j["series_header"] = kSweepHeader;
  } else {
    j["series_header"] = kSeriesHeader;
    j["n_atoms"] = c.n_atoms();
    j["fd_delta_T"] = c.fd_delta();
    const dynamics::MasterEquation eq(c.params, c.schedule);
    j["effective_kick_strength"] = eq.effective_kick_strength();
    j["larmor"] = {{"configured_rad_s", eq.larmor()},
                   {"configured_millihertz", units::rad_s_to_millihertz(eq.larmor())},
                   {"formula_millihertz",
                    units::rad_s_to_millihertz(dynamics::larmor_frequency(c.params.b_field, c.params.g_factor))},
                   {"configured_over_formula",
                    eq.larmor() / dynamics::larmor_frequency(c.params.b_field, c.params.g_factor)}};
    config::json arms = config::json::object();
    for (const auto& a : r.arms) arms[a.name] = arm_json(a, c.n_atoms());
    j["arms"] = arms;
    if (r.improvement_optimal) {
      j["improvement_optimal_percent"] = 100.0 * *r.improvement_optimal;
      j["improvement_sz_percent"] = 100.0 * *r.improvement_sz;
    }
  }
  if (r.convergence_requested) {
    config::json checks = config::json::array();
    bool all = true;
    for (const auto& chk : r.convergence) {
      checks.push_back({{"name", chk.name},
                        {"unkicked_max_qfi_rescaled_change", chk.unkicked_change},
                        {"kicked_max_qfi_rescaled_change", chk.kicked_change},
                        {"improvement_optimal_percent", 100.0 * chk.improvement_optimal},
                        {"improvement_sz_percent", 100.0 * chk.improvement_sz},
                        {"passed", chk.passed}});
      all = all && chk.passed;
    }
    j["convergence"] = {{"tolerance", kConvergenceTolerance}, {"checks", checks}, {"all_passed", all}};
  }
  j["warnings"] = r.warnings;
  return j;
}

struct RunArtifacts {
  std::filesystem::path series_path;
  std::filesystem::path summary_path;
  std::filesystem::path log_path;
};

/// Writes `text` to `path` through a temporary file and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

struct ExecuteOptions {
  bool converge = false;
  bool strict = false;
};

/// Runs the configured scenario.
inline RunOutcome execute(const config::ExperimentConfig& c, const ExecuteOptions& opt = {}) {
  const auto warnings = config::validate(c);
  if (opt.strict && !warnings.empty()) throw ValidationError(warnings.messages.front());
  RunOutcome r;
  r.scenario = c.scenario;
  r.warnings = warnings.messages;
  switch (c.scenario) {
    case config::Scenario::SerfCompare: {
      auto cmp = run_compare(c, &r.log);
      require_bracketed(cmp.unkicked.series);
      if (opt.converge) {
        r.convergence = run_convergence(c, cmp);
        r.convergence_requested = true;
      }
      r.improvement_optimal = cmp.improvement_optimal;
      r.improvement_sz = cmp.improvement_sz;
      r.arms.push_back(std::move(cmp.unkicked));
      r.arms.push_back(std::move(cmp.kicked));
      for (const auto& a : r.arms) note_unbracketed_fisher(a, r.warnings);
      break;
    }
    case config::Scenario::SerfSingle:
      r.arms.push_back(run_single(c, &r.log));
      note_unbracketed_fisher(r.arms.back(), r.warnings);
      if (opt.converge) r.warnings.push_back("--converge applies to serf_compare only; ignored");
      break;
    case config::Scenario::KickedTopSweep:
      if (opt.converge) r.warnings.push_back("--converge applies to serf_compare only; ignored");
      break;
  }
  return r;
}

/// Runs the scenario and writes series.csv, summary.json and run.log into
/// the output directory. On failure no partial artifact is left behind.
inline RunArtifacts run_and_write(const config::ExperimentConfig& c, const ExecuteOptions& opt = {}) {
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  RunArtifacts a{dir / "series.csv", dir / "summary.json", dir / "run.log"};
  std::vector<std::filesystem::path> written;
  try {
    std::string series;
    RunOutcome r;
    if (c.scenario == config::Scenario::KickedTopSweep) {
      r = execute(c, opt);
      series = sweep_csv(run_kicked_top_sweep(c));
    } else {
      r = execute(c, opt);
      series = series_csv(r.arms);
    }
    const std::string summary = emit_summary(r, c).dump(2) + "\n";
    for (const auto& [path, text] : {std::pair{a.series_path, series}, std::pair{a.summary_path, summary},
                                     std::pair{a.log_path, r.log}}) {
      write_atomic(path, text);
      written.push_back(path);
    }
  } catch (...) {
    for (const auto& p : written) std::filesystem::remove(p);
    for (const auto& p : {a.series_path, a.summary_path, a.log_path})
      std::filesystem::remove(p.string() + ".tmp");
    throw;
  }
  return a;
}

}  // namespace serfkick::scenarios
