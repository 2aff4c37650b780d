// serfkick: run magnetometer comparisons and kicked-top sweeps from a JSON config.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 other errors.

#include "serfkick/scenarios.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace serfkick;

struct Flags {
  std::string config_path;
  std::string scenario;
  std::string out;
  int workers = 0;
  bool strict = false;
  bool converge = false;
};

config::ExperimentConfig resolve(const Flags& f, std::optional<config::Scenario> forced) {
  auto c = f.config_path.empty() ? config::ExperimentConfig{} : config::load_config(f.config_path);
  if (!f.scenario.empty()) c.scenario = config::parse_scenario(f.scenario);
  if (forced) c.scenario = *forced;
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.workers != 0) {
    if (f.workers < 1) throw ValidationError("--workers must be >= 1");
    c.worker_count = f.workers;
  }
  return c;
}

int run(const Flags& f, std::optional<config::Scenario> forced) {
  const auto c = resolve(f, forced);
  for (const auto& w : config::validate(c).messages) std::cerr << "warning: " << w << '\n';
  const auto a = scenarios::run_and_write(c, {f.converge, f.strict});
  std::cout << a.series_path.string() << '\n' << a.summary_path.string() << '\n' << a.log_path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kicked SERF magnetometer simulator"};
  app.require_subcommand(0, 1);
  Flags flags;
  auto add_common = [&flags](CLI::App* a) {
    a->add_option("--config", flags.config_path, "JSON config file (missing keys take defaults)")->check(CLI::ExistingFile);
    a->add_option("--scenario", flags.scenario, "serf_compare | serf_single | kicked_top_sweep");
    a->add_option("--out", flags.out, "output directory");
    a->add_option("--workers", flags.workers, "worker threads");
    a->add_flag("--strict", flags.strict, "treat configuration warnings as errors");
    a->add_flag("--converge", flags.converge, "add dt / delta / Doppler-node convergence checks");
  };
  add_common(&app);
  auto* run_cmd = app.add_subcommand("run", "run the configured scenario (default)");
  add_common(run_cmd);
  auto* kt_cmd = app.add_subcommand("kickedtop", "run the kicked-top sweep");
  add_common(kt_cmd);
  auto* defaults_cmd = app.add_subcommand("defaults", "print the default config as JSON");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*defaults_cmd) {
      std::cout << config::to_json(config::ExperimentConfig{}).dump(2) << '\n';
      return 0;
    }
    if (*kt_cmd) return run(flags, config::Scenario::KickedTopSweep);
    return run(flags, std::nullopt);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
