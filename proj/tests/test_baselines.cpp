#include <gtest/gtest.h>

#include "dccfr/baselines.hpp"

using namespace dccfr;

namespace {

std::vector<double> obs_e(double t_set, double t_out, const ThermalParams& p = {}) {
  std::vector<double> o(9, 0.0);
  o[5] = t_out / 40.0;
  o[8] = (t_set - p.set_min) / (p.set_max - p.set_min);
  return o;
}

std::vector<double> obs_bat(double ci) {
  std::vector<double> o(11, 0.0);
  for (std::size_t k = 6; k < 11; ++k) o[k] = ci / kCiRef;
  return o;
}

constexpr int kHold = static_cast<int>(SetpointAction::Hold);
constexpr int kUp = static_cast<int>(SetpointAction::Up);
constexpr int kDown = static_cast<int>(SetpointAction::Down);

}  // namespace

TEST(RbcHvac, FixedSetpoint) {
  const ThermalParams p;
  const BaselineSpec spec;
  EXPECT_EQ(rbc_hvac_action(obs_e(22.0, 10.0), spec, p), kHold);
  EXPECT_EQ(rbc_hvac_action(obs_e(20.0, 10.0), spec, p), kUp);
  EXPECT_EQ(rbc_hvac_action(obs_e(25.0, 10.0), spec, p), kDown);
}

TEST(RbcHvac, OutdoorTrackingClamps) {
  const ThermalParams p;
  BaselineSpec spec;
  spec.hvac = HvacRule::OutdoorTracking;
  EXPECT_EQ(rbc_hvac_action(obs_e(27.0, 30.0), spec, p), kHold);
  EXPECT_EQ(rbc_hvac_action(obs_e(18.0, -5.0), spec, p), kHold);
  EXPECT_EQ(rbc_hvac_action(obs_e(20.0, 20.0), spec, p), kUp);
}

TEST(ImmediateLs, AlwaysAssign) {
  EXPECT_EQ(immediate_ls_action(std::vector<double>(14, 0.3)), static_cast<int>(LsAction::Assign));
}

TEST(ImmediateLs, QueueStaysShallowWithAmpleHeadroom) {
  EnvConfig cfg;
  cfg.bundle = synth_bundle(Profile::NY, 1, 5);
  CoupledEnv env(cfg);
  const BaselineSpec spec;
  const auto th = ci_thresholds(cfg.bundle.ci, spec);
  double penalty = 0.0;
  while (!env.done()) {
    const std::size_t t = env.state().t;
    const double arrival = split_arrivals(cfg.bundle.workload[t], cfg.ls).flex_arrival;
    JointAction a{};
    for (Agent ag : kAgents) a[index_of(ag)] = baseline_action(ag, env, spec, th);
    const auto m = env.step(a).metrics;
    ASSERT_LE(m.queue, arrival + 1e-12);
    penalty += m.penalty;
  }
  EXPECT_NEAR(penalty, 0.0, 1e-9);
}

TEST(CiThresholdBat, Bands) {
  BaselineSpec spec;
  spec.bat = BatteryRule::CiThreshold;
  const CiThresholds th{200.0, 400.0};
  EXPECT_EQ(ci_threshold_bat_action(obs_bat(100), spec, th), static_cast<int>(BatteryAction::Charge));
  EXPECT_EQ(ci_threshold_bat_action(obs_bat(500), spec, th), static_cast<int>(BatteryAction::Supply));
  EXPECT_EQ(ci_threshold_bat_action(obs_bat(300), spec, th), static_cast<int>(BatteryAction::Idle));
  EXPECT_EQ(ci_threshold_bat_action(obs_bat(100), spec, th, {false, true, true}), static_cast<int>(BatteryAction::Idle));
  EXPECT_EQ(ci_threshold_bat_action(obs_bat(100), BaselineSpec{}, th), static_cast<int>(BatteryAction::Idle));
}

TEST(Percentile, MatchesLinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 25.0), 1.75);
  EXPECT_DOUBLE_EQ(percentile({5}, 75.0), 5.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2, 5}, 50.0), 3.0);
}

TEST(Baselines, PureFunctions) {
  const ThermalParams p;
  BaselineSpec spec;
  spec.bat = BatteryRule::CiThreshold;
  const CiThresholds th{200.0, 400.0};
  for (double ci : {50.0, 250.0, 450.0}) {
    EXPECT_EQ(ci_threshold_bat_action(obs_bat(ci), spec, th), ci_threshold_bat_action(obs_bat(ci), spec, th));
  }
  EXPECT_EQ(rbc_hvac_action(obs_e(19.0, 3.0), spec, p), rbc_hvac_action(obs_e(19.0, 3.0), spec, p));
}

TEST(Baselines, CiThresholdBatteryLowersCo2AtEqualEnergy) {
  EnvConfig cfg;
  cfg.bundle = synth_bundle(Profile::NY, 365, 7);
  const auto run = [&](const BaselineSpec& spec) {
    CoupledEnv env(cfg);
    const auto th = ci_thresholds(cfg.bundle.ci, spec);
    std::vector<StepMetrics> ms;
    while (!env.done()) {
      JointAction a{};
      for (Agent ag : kAgents) a[index_of(ag)] = baseline_action(ag, env, spec, th);
      ms.push_back(env.step(a).metrics);
    }
    return episode_totals(ms);
  };
  BaselineSpec heuristic;
  heuristic.bat = BatteryRule::CiThreshold;
  const auto base = run(BaselineSpec{});
  const auto bat = run(heuristic);
  EXPECT_LT(bat.co2_tonnes, base.co2_tonnes);
  EXPECT_EQ(bat.energy_mwh, base.energy_mwh);
  EXPECT_EQ(run(BaselineSpec{}).co2_tonnes, base.co2_tonnes);
}

TEST(Baselines, SpecValidation) {
  BaselineSpec s;
  s.fixed_setpoint = 30.0;
  EXPECT_THROW(s.validate(ThermalParams{}), Error);
  BaselineSpec t;
  t.low_pct = 80.0;
  EXPECT_THROW(t.validate(ThermalParams{}), Error);
}
