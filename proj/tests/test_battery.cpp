#include <gtest/gtest.h>

#include <random>

#include "dccfr/battery.hpp"

using namespace dccfr;

namespace {

BatteryState at(double soc) {
  BatteryState s;
  s.soc = soc;
  return s;
}

}  // namespace

TEST(BatteryStep, ChargeHandEvaluation) {
  const BatteryParams p;
  const auto r = battery_step(at(300), BatteryAction::Charge, 800, p);
  EXPECT_DOUBLE_EQ(r.state.soc, 371.25);
  EXPECT_DOUBLE_EQ(r.grid_kw, 1100.0);
  EXPECT_DOUBLE_EQ(r.state.last_charge_kw, 300.0);
}

TEST(BatteryStep, SupplyHandEvaluation) {
  const BatteryParams p;
  const auto r = battery_step(at(300), BatteryAction::Supply, 800, p);
  EXPECT_NEAR(r.state.soc, 221.053, 5e-4);
  EXPECT_DOUBLE_EQ(r.grid_kw, 500.0);
}

TEST(BatteryStep, FullBatteryChargeIsNoOp) {
  const BatteryParams p;
  const auto r = battery_step(at(600), BatteryAction::Charge, 500, p);
  EXPECT_EQ(r.state.soc, 600.0);
  EXPECT_EQ(r.grid_kw, 500.0);
}

TEST(BatteryStep, SupplyNeverExportsAndIdleIsIdentity) {
  const BatteryParams p;
  const auto r = battery_step(at(500), BatteryAction::Supply, 120, p);
  EXPECT_DOUBLE_EQ(r.grid_kw, 0.0);
  const auto i = battery_step(at(123.456), BatteryAction::Idle, 700, p);
  EXPECT_EQ(i.state.soc, 123.456);
  EXPECT_EQ(i.grid_kw, 700.0);
}

TEST(Mask, FullReserveInterior) {
  const BatteryParams p;
  EXPECT_EQ(action_mask(at(600), p), (std::array<bool, 3>{false, true, true}));
  EXPECT_EQ(action_mask(at(60), p), (std::array<bool, 3>{true, false, true}));
  EXPECT_EQ(action_mask(at(300), p), (std::array<bool, 3>{true, true, true}));
}

TEST(BatteryStep, FuzzedBoundsAndNoExport) {
  const BatteryParams p;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> act(0, 2);
  std::uniform_real_distribution<double> fac(0.0, 1500.0);
  BatteryState s;
  for (int i = 0; i < 100000; ++i) {
    const auto r = battery_step(s, static_cast<BatteryAction>(act(rng)), fac(rng), p);
    ASSERT_GE(r.state.soc, p.soc_min);
    ASSERT_LE(r.state.soc, p.capacity);
    ASSERT_GE(r.grid_kw, 0.0);
    s = r.state;
  }
}

TEST(BatteryStep, RoundTripFullCycle) {
  const BatteryParams p;
  BatteryState s = at(p.soc_min);
  double drawn = 0.0, delivered = 0.0;
  while (s.soc < p.capacity) {
    const auto r = battery_step(s, BatteryAction::Charge, 700, p);
    drawn += r.state.last_charge_kw * p.dt;
    s = r.state;
  }
  while (s.soc > p.soc_min) {
    const auto r = battery_step(s, BatteryAction::Supply, 700, p);
    delivered += r.state.last_discharge_kw * p.dt;
    s = r.state;
  }
  ASSERT_EQ(s.soc, p.soc_min);
  const double bound = p.eta_c * p.eta_d * drawn;
  EXPECT_LE(delivered, bound * (1.0 + 1e-9));
  EXPECT_NEAR(delivered, bound, bound * 1e-9);
}

TEST(BatteryStep, RoundTripBoundOnRandomEpisodes) {
  const BatteryParams p;
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> act(0, 2);
  std::uniform_real_distribution<double> fac(0.0, 1200.0);
  for (int ep = 0; ep < 50; ++ep) {
    BatteryState s;
    const double soc0 = s.soc;
    double drawn = 0.0, delivered = 0.0;
    for (int t = 0; t < 2000; ++t) {
      const auto r = battery_step(s, static_cast<BatteryAction>(act(rng)), fac(rng), p);
      drawn += r.state.last_charge_kw * p.dt;
      delivered += r.state.last_discharge_kw * p.dt;
      s = r.state;
    }
    // delivered = eta_d * (stored in - net soc gain) <= eta_d * (eta_c * drawn - (soc_T - soc_0))
    const double bound = p.eta_d * (p.eta_c * drawn - (s.soc - soc0));
    ASSERT_LE(delivered, bound + 1e-9 * std::max(1.0, bound));
  }
}
