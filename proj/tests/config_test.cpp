#include "serfkick/config.hpp"
#include "serfkick/dynamics.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace serfkick;
using namespace serfkick::config;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("serfkick_config_test_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, DefaultsMatchReferenceConfiguration) {
  const ExperimentConfig c;
  EXPECT_DOUBLE_EQ(c.schedule.period_tau, 1e-3);
  EXPECT_DOUBLE_EQ(c.schedule.pulse_duration, 2e-6);
  EXPECT_DOUBLE_EQ(c.schedule.i_kick, 1.0);  // 0.1 mW/cm^2
  EXPECT_NEAR(units::rad_s_to_mhz(c.schedule.detuning_34), -584.0, 1e-9);
  EXPECT_DOUBLE_EQ(c.params.polarization_q, 0.95);
  EXPECT_DOUBLE_EQ(c.params.b_field, 4e-14);
  EXPECT_DOUBLE_EQ(c.params.r_se, 12.0);
  EXPECT_DOUBLE_EQ(c.params.r_sd, 0.12);
  EXPECT_DOUBLE_EQ(c.params.temperature, 294.0);
  EXPECT_DOUBLE_EQ(c.params.density, 2e16);
  EXPECT_NEAR(units::rad_s_to_mhz(c.params.doppler_fwhm), 357.0, 1e-9);
  EXPECT_NEAR(units::rad_s_to_millihertz(dynamics::larmor_rate(c.params, c.params.b_field)), 0.44, 1e-12);
  EXPECT_TRUE(validate(c).empty());
}

TEST(Config, EmptyTextGivesDefaults) {
  EXPECT_EQ(to_json(parse("")), to_json(ExperimentConfig{}));
  EXPECT_EQ(to_json(parse("  \n\t")), to_json(ExperimentConfig{}));
  EXPECT_EQ(to_json(parse("{}")), to_json(ExperimentConfig{}));
  EXPECT_EQ(to_json(load_config(temp_file("empty.json", ""))), to_json(ExperimentConfig{}));
}

TEST(Config, RoundTripOfDefaults) {
  const json emitted = to_json(ExperimentConfig{});
  EXPECT_EQ(to_json(from_json(emitted)), emitted);
  EXPECT_EQ(to_json(parse(emitted.dump(2))), emitted);
}

TEST(Config, RoundTripOfNonDefaults) {
  ExperimentConfig c;
  c.params.b_field = 8e-14;
  c.params.spin_exchange_form = dynamics::SpinExchangeForm::Literal;
  c.params.larmor_mode = dynamics::LarmorMode::Formula;
  c.schedule.detuning_mode = dynamics::DetuningMode::Physical;
  c.schedule.kicks_enabled = false;
  c.scenario = Scenario::SerfSingle;
  c.kicked_top.steps = {0, 3};
  c.total_time = 2.0;
  c.snapshot_stride = 100;
  const json j = to_json(c);
  EXPECT_EQ(to_json(from_json(j)), j);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(parse(R"({"b_field": 4e-14})"), ValidationError);
  EXPECT_THROW(load_config(temp_file("unknown.json", R"({"no_such_key": 1})")), ValidationError);
}

TEST(Config, MalformedInputRejected) {
  EXPECT_THROW(parse("{"), ValidationError);
  EXPECT_THROW(parse("[1, 2]"), ValidationError);
  EXPECT_THROW(parse(R"({"b_field_T": "strong"})"), ValidationError);
  EXPECT_THROW(parse(R"({"detuning_mode": "sideways"})"), ValidationError);
  EXPECT_THROW(parse(R"({"polarization": [1, 0]})"), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/serfkick.json"), ValidationError);
}

TEST(Config, InvariantViolationsRejected) {
  EXPECT_THROW(parse(R"({"pulse_duration_us": 2000})"), ValidationError);
  EXPECT_THROW(parse(R"({"total_time_s": 0.0105})"), ValidationError);  // not whole periods
  EXPECT_THROW(parse(R"({"total_time_s": -1})"), ValidationError);
  EXPECT_THROW(parse(R"({"snapshot_stride": 0})"), ValidationError);
  EXPECT_THROW(parse(R"({"fd_delta_rel": 0})"), ValidationError);
  EXPECT_THROW(parse(R"({"worker_count": 0})"), ValidationError);
  EXPECT_THROW(parse(R"({"polarization_q": 1.5})"), ValidationError);
  EXPECT_THROW(parse(R"({"doppler_points": 0})"), ValidationError);
  EXPECT_THROW(parse(R"({"kt_f": 1.2})"), ValidationError);
  EXPECT_THROW(parse(R"({"kt_steps": [-1]})"), ValidationError);
}

TEST(Config, UnitsConvertedOnLoad) {
  const auto c = parse(R"({"tau_ms": 2, "pulse_duration_us": 5, "i_kick_mw_cm2": 0.3, "dt_free_us": 4,
                           "dt_pulse_ns": 10, "density_per_cm3": 1e11, "sensing_volume_cm3": 2, "total_time_s": 4})");
  EXPECT_DOUBLE_EQ(c.schedule.period_tau, 2e-3);
  EXPECT_DOUBLE_EQ(c.schedule.pulse_duration, 5e-6);
  EXPECT_DOUBLE_EQ(c.schedule.i_kick, 3.0);
  EXPECT_DOUBLE_EQ(c.params.dt_free, 4e-6);
  EXPECT_DOUBLE_EQ(c.params.dt_pulse, 1e-8);
  EXPECT_DOUBLE_EQ(c.n_atoms(), 2e11);
}

TEST(Config, DoubledFieldDoublesLarmor) {
  const auto base = parse("");
  const auto doubled = parse(R"({"b_field_T": 8e-14})");
  const dynamics::MasterEquation a(base.params, base.schedule);
  const dynamics::MasterEquation b(doubled.params, doubled.schedule);
  EXPECT_NEAR(b.larmor() / a.larmor(), 2.0, 1e-14);
}

TEST(Config, SerfWarning) {
  EXPECT_TRUE(validate(parse("")).empty());
  const auto c = parse(R"({"b_field_T": 2e-13})");  // r_se / Omega ~ 870
  const auto w = validate(c);
  ASSERT_EQ(w.messages.size(), 1u);
  EXPECT_NE(w.messages[0].find("SERF"), std::string::npos);
}

TEST(Config, FingerprintTracksPhysicsOnly) {
  ExperimentConfig a;
  ExperimentConfig b;
  b.output_dir = "elsewhere";
  b.worker_count = 4;
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.params.r_se = 13.0;
  EXPECT_NE(fingerprint(a), fingerprint(b));
  EXPECT_EQ(fingerprint(a).size(), 16u);
}

TEST(Config, ScenarioNames) {
  for (auto s : {Scenario::SerfCompare, Scenario::SerfSingle, Scenario::KickedTopSweep})
    EXPECT_EQ(parse_scenario(scenario_name(s)), s);
  EXPECT_THROW(parse_scenario("compare"), ValidationError);
}
