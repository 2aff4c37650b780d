#pragma once

// Experiment configuration: a flat JSON object whose keys carry their units.
// Conversion to internal SI / rad/s happens here and nowhere else.

#include "serfkick/constants.hpp"
#include "serfkick/dynamics.hpp"
#include "serfkick/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace serfkick::config {

using json = nlohmann::ordered_json;

enum class Scenario { SerfCompare, SerfSingle, KickedTopSweep };

struct KickedTopSweep {
  double f = 3.0;
  std::vector<double> alpha{0.1, 0.5};    ///< [rad]
  std::vector<double> k{0.0, 1.0, 3.0};
  std::vector<int> steps{0, 1, 10, 50};
  double theta = std::numbers::pi / 2.0;  ///< initial coherent-state polar angle [rad]
  double phi = 0.0;                       ///< [rad]
  double delta = 1e-7;                    ///< finite-difference step in alpha [rad]
};

struct ExperimentConfig {
  dynamics::MagnetometerParams params;
  dynamics::PulseSchedule schedule;
  double total_time = 300.0;    ///< [s]
  int snapshot_stride = 1000;   ///< periods between snapshots
  double fd_delta_rel = 1e-2;   ///< delta B / B
  double sensing_volume = 1e-6;  ///< [m^3], n_atoms = density * volume
  Scenario scenario = Scenario::SerfCompare;
  std::string output_dir = "serfkick-out";
  int worker_count = 1;
  KickedTopSweep kicked_top;

  double n_atoms() const { return params.density * sensing_volume; }
  double fd_delta() const { return fd_delta_rel * std::abs(params.b_field); }
};

inline constexpr int kConfigSchemaVersion = 1;

// --- enum spellings -------------------------------------------------------

template <class E>
struct EnumName {
  E value;
  const char* name;
};

inline constexpr EnumName<Scenario> kScenarioNames[] = {
    {Scenario::SerfCompare, "serf_compare"}, {Scenario::SerfSingle, "serf_single"},
    {Scenario::KickedTopSweep, "kicked_top_sweep"}};
inline constexpr EnumName<dynamics::LarmorMode> kLarmorModeNames[] = {{dynamics::LarmorMode::Reference, "reference"},
                                                                      {dynamics::LarmorMode::Formula, "formula"}};
inline constexpr EnumName<dynamics::LarmorSign> kLarmorSignNames[] = {{dynamics::LarmorSign::Literal, "common"},
                                                                      {dynamics::LarmorSign::Signed, "signed"}};
inline constexpr EnumName<dynamics::SpinExchangeForm> kSpinExchangeNames[] = {
    {dynamics::SpinExchangeForm::Symmetrized, "symmetrized"}, {dynamics::SpinExchangeForm::Literal, "literal"}};
inline constexpr EnumName<dynamics::DetuningMode> kDetuningNames[] = {
    {dynamics::DetuningMode::PerManifold, "per_manifold"}, {dynamics::DetuningMode::Physical, "physical"}};
inline constexpr EnumName<dynamics::LightShiftModel> kLightModelNames[] = {
    {dynamics::LightShiftModel::FullTensor, "full_tensor"}, {dynamics::LightShiftModel::Rank2Only, "rank2_only"}};

template <class E, std::size_t N>
std::string to_name(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  throw std::logic_error("unnamed enum value");
}

template <class E, std::size_t N>
E from_name(const EnumName<E> (&table)[N], const std::string& s, const char* key) {
  std::string options;
  for (const auto& e : table) {
    if (s == e.name) return e.value;
    options += options.empty() ? e.name : std::string(", ") + e.name;
  }
  throw ValidationError(std::string("config: ") + key + " must be one of {" + options + "}, got \"" + s + "\"");
}

inline std::string scenario_name(Scenario s) { return to_name(kScenarioNames, s); }
inline Scenario parse_scenario(const std::string& s) { return from_name(kScenarioNames, s, "scenario"); }

// --- JSON mapping ---------------------------------------------------------

inline json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

/// The full configuration as JSON in external units.
inline json to_json(const ExperimentConfig& c) {
  const auto& p = c.params;
  const auto& s = c.schedule;
  json j;
  j["scenario"] = scenario_name(c.scenario);
  j["output_dir"] = c.output_dir;
  j["worker_count"] = c.worker_count;
  j["total_time_s"] = c.total_time;
  j["snapshot_stride"] = c.snapshot_stride;
  j["fd_delta_rel"] = c.fd_delta_rel;
  j["sensing_volume_cm3"] = c.sensing_volume * 1e6;

  j["b_field_T"] = p.b_field;
  j["r_se_per_s"] = p.r_se;
  j["r_sd_per_s"] = p.r_sd;
  j["larmor_mode"] = to_name(kLarmorModeNames, p.larmor_mode);
  j["larmor_reference_millihertz"] = units::rad_s_to_millihertz(p.larmor_reference);
  j["larmor_reference_field_T"] = p.larmor_reference_field;
  j["g_factor"] = p.g_factor;
  j["larmor_sign"] = to_name(kLarmorSignNames, p.larmor_sign);
  j["temperature_K"] = p.temperature;
  j["density_per_cm3"] = p.density * 1e-6;
  j["polarization_q"] = p.polarization_q;
  j["doppler_fwhm_mhz"] = units::rad_s_to_mhz(p.doppler_fwhm);
  j["doppler_points"] = p.doppler_points;
  j["doppler_sigma_cut"] = p.doppler_sigma_cut;
  j["dt_free_us"] = p.dt_free * 1e6;
  j["dt_pulse_ns"] = p.dt_pulse * 1e9;
  j["hermitize_each_step"] = p.hermitize_each_step;
  j["renormalize_trace"] = p.renormalize_trace;
  j["spin_exchange_form"] = to_name(kSpinExchangeNames, p.spin_exchange_form);
  j["hyperfine_term"] = p.hyperfine_term;

  j["tau_ms"] = s.period_tau * 1e3;
  j["pulse_duration_us"] = s.pulse_duration * 1e6;
  j["i_kick_mw_cm2"] = units::w_m2_to_mw_cm2(s.i_kick);
  j["detuning_34_mhz"] = units::rad_s_to_mhz(s.detuning_34);
  j["detuning_mode"] = to_name(kDetuningNames, s.detuning_mode);
  j["light_shift_model"] = to_name(kLightModelNames, s.light_model);
  j["polarization"] = vec3_json(s.polarization);
  j["propagation"] = vec3_json(s.propagation);
  j["kicks_enabled"] = s.kicks_enabled;

  const auto& kt = c.kicked_top;
  j["kt_f"] = kt.f;
  j["kt_alpha_rad"] = kt.alpha;
  j["kt_k"] = kt.k;
  j["kt_steps"] = kt.steps;
  j["kt_theta_rad"] = kt.theta;
  j["kt_phi_rad"] = kt.phi;
  j["kt_delta_rad"] = kt.delta;
  return j;
}

namespace detail {

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: key \"") + key + "\": " + e.what());
  }
}

inline Eigen::Vector3d get_vec3(const json& j, const char* key) {
  const auto v = get<std::vector<double>>(j, key);
  if (v.size() != 3) throw ValidationError(std::string("config: ") + key + " must have three components");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Diagnostics that do not invalidate a configuration.
struct Warnings {
  std::vector<std::string> messages;
  bool empty() const { return messages.empty(); }
};

/// Invariants beyond what the dynamics layer checks; returns soft warnings.
inline Warnings validate(const ExperimentConfig& c) {
  dynamics::validate(c.params, c.schedule);
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("config: " + what);
  };
  require(c.total_time > 0.0 && std::isfinite(c.total_time), "total_time_s must be positive");
  const double periods = c.total_time / c.schedule.period_tau;
  require(std::abs(periods - std::round(periods)) < 1e-6, "total_time_s must be a whole number of periods");
  require(c.snapshot_stride >= 1, "snapshot_stride must be >= 1");
  require(std::round(periods) >= c.snapshot_stride, "total_time_s must cover at least one snapshot");
  require(c.fd_delta_rel > 0.0 && c.fd_delta_rel < 0.5, "fd_delta_rel must lie in (0, 0.5)");
  require(c.sensing_volume > 0.0, "sensing_volume_cm3 must be positive");
  require(c.worker_count >= 1, "worker_count must be >= 1");
  require(c.params.b_field != 0.0 || c.scenario == Scenario::KickedTopSweep,
          "b_field_T must be non-zero (finite differences are relative to B)");
  const auto& kt = c.kicked_top;
  require(kt.f >= 0.5 && std::abs(2.0 * kt.f - std::round(2.0 * kt.f)) < 1e-12, "kt_f must be a positive half-integer");
  require(!kt.alpha.empty() && !kt.k.empty() && !kt.steps.empty(), "kicked-top sweep lists must be non-empty");
  for (double k : kt.k) require(k >= 0.0, "kt_k entries must be non-negative");
  for (int n : kt.steps) require(n >= 0, "kt_steps entries must be non-negative");
  require(kt.delta > 0.0, "kt_delta_rad must be positive");

  Warnings w;
  const double larmor = std::abs(dynamics::larmor_rate(c.params, c.params.b_field));
  if (larmor > 0.0 && c.params.r_se / larmor <= 1e3) {
    w.messages.push_back("SERF condition violated: r_se / Omega_Lar = " + std::to_string(c.params.r_se / larmor) +
                         " <= 1e3");
  }
  return w;
}

/// Builds a configuration from JSON, starting from defaults. Unknown keys
/// are rejected.
inline ExperimentConfig from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
  ExperimentConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ValidationError("config: unknown key \"" + key + "\"");
  }
  json m = defaults;
  for (const auto& [key, value] : j.items()) m[key] = value;

  using detail::get;
  auto& p = c.params;
  auto& s = c.schedule;
  c.scenario = parse_scenario(get<std::string>(m, "scenario"));
  c.output_dir = get<std::string>(m, "output_dir");
  c.worker_count = get<int>(m, "worker_count");
  c.total_time = get<double>(m, "total_time_s");
  c.snapshot_stride = get<int>(m, "snapshot_stride");
  c.fd_delta_rel = get<double>(m, "fd_delta_rel");
  c.sensing_volume = get<double>(m, "sensing_volume_cm3") * 1e-6;

  p.b_field = get<double>(m, "b_field_T");
  p.r_se = get<double>(m, "r_se_per_s");
  p.r_sd = get<double>(m, "r_sd_per_s");
  p.larmor_mode = from_name(kLarmorModeNames, get<std::string>(m, "larmor_mode"), "larmor_mode");
  p.larmor_reference = units::millihertz_to_rad_s(get<double>(m, "larmor_reference_millihertz"));
  p.larmor_reference_field = get<double>(m, "larmor_reference_field_T");
  p.g_factor = get<double>(m, "g_factor");
  p.larmor_sign = from_name(kLarmorSignNames, get<std::string>(m, "larmor_sign"), "larmor_sign");
  p.temperature = get<double>(m, "temperature_K");
  p.density = get<double>(m, "density_per_cm3") * 1e6;
  p.polarization_q = get<double>(m, "polarization_q");
  p.doppler_fwhm = units::mhz_to_rad_s(get<double>(m, "doppler_fwhm_mhz"));
  p.doppler_points = get<int>(m, "doppler_points");
  p.doppler_sigma_cut = get<double>(m, "doppler_sigma_cut");
  p.dt_free = get<double>(m, "dt_free_us") * 1e-6;
  p.dt_pulse = get<double>(m, "dt_pulse_ns") * 1e-9;
  p.hermitize_each_step = get<bool>(m, "hermitize_each_step");
  p.renormalize_trace = get<bool>(m, "renormalize_trace");
  p.spin_exchange_form =
      from_name(kSpinExchangeNames, get<std::string>(m, "spin_exchange_form"), "spin_exchange_form");
  p.hyperfine_term = get<bool>(m, "hyperfine_term");

  s.period_tau = get<double>(m, "tau_ms") * 1e-3;
  s.pulse_duration = get<double>(m, "pulse_duration_us") * 1e-6;
  s.i_kick = units::mw_cm2_to_w_m2(get<double>(m, "i_kick_mw_cm2"));
  s.detuning_34 = units::mhz_to_rad_s(get<double>(m, "detuning_34_mhz"));
  s.detuning_mode = from_name(kDetuningNames, get<std::string>(m, "detuning_mode"), "detuning_mode");
  s.light_model = from_name(kLightModelNames, get<std::string>(m, "light_shift_model"), "light_shift_model");
  s.polarization = detail::get_vec3(m, "polarization");
  s.propagation = detail::get_vec3(m, "propagation");
  s.kicks_enabled = get<bool>(m, "kicks_enabled");

  auto& kt = c.kicked_top;
  kt.f = get<double>(m, "kt_f");
  kt.alpha = get<std::vector<double>>(m, "kt_alpha_rad");
  kt.k = get<std::vector<double>>(m, "kt_k");
  kt.steps = get<std::vector<int>>(m, "kt_steps");
  kt.theta = get<double>(m, "kt_theta_rad");
  kt.phi = get<double>(m, "kt_phi_rad");
  kt.delta = get<double>(m, "kt_delta_rad");

  validate(c);
  return c;
}

inline ExperimentConfig parse(const std::string& text) {
  // an empty (or whitespace-only) file means "all defaults"
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    ExperimentConfig c;
    validate(c);
    return c;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config: parse error: ") + e.what());
  }
  return from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

/// Short stable fingerprint of the physics-relevant configuration (FNV-1a
/// over the canonical JSON, excluding output location and worker count).
inline std::string fingerprint(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("worker_count");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace serfkick::config
