#pragma once

// Rule-based controllers used as the reference run and to fill agent
// slots that are not being trained.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dccfr/env.hpp"

namespace dccfr {

enum class HvacRule { FixedSetpoint, OutdoorTracking };
enum class BatteryRule { AlwaysIdle, CiThreshold };

struct BaselineSpec {
  HvacRule hvac = HvacRule::FixedSetpoint;
  double fixed_setpoint = 22.0;
  BatteryRule bat = BatteryRule::AlwaysIdle;
  double low_pct = 25.0;
  double high_pct = 75.0;

  void validate(const ThermalParams& p) const {
    if (hvac == HvacRule::FixedSetpoint && !(fixed_setpoint >= p.set_min && fixed_setpoint <= p.set_max)) {
      throw Error(ErrorCode::ConfigInvalid, "baseline setpoint outside [set_min, set_max]");
    }
    if (!(low_pct >= 0.0 && low_pct < high_pct && high_pct <= 100.0)) {
      throw Error(ErrorCode::ConfigInvalid, "baseline CI percentiles need 0 <= low < high <= 100");
    }
  }
};

struct CiThresholds {
  double low = 0.0;
  double high = 0.0;
};

/// Linear-interpolation percentile (the numpy default).
inline double percentile(std::vector<double> v, double pct) {
  if (v.empty()) throw Error(ErrorCode::Empty, "percentile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

inline CiThresholds ci_thresholds(const TimeSeries& ci, const BaselineSpec& spec) {
  return {percentile(ci.values, spec.low_pct), percentile(ci.values, spec.high_pct)};
}

inline int step_toward(double t_set, double target) {
  constexpr double tol = 1e-6;
  if (t_set < target - tol) return static_cast<int>(SetpointAction::Up);
  if (t_set > target + tol) return static_cast<int>(SetpointAction::Down);
  return static_cast<int>(SetpointAction::Hold);
}

inline int rbc_hvac_action(std::span<const double> obs_e, const BaselineSpec& spec, const ThermalParams& p) {
  if (obs_e.size() != obs_size(Agent::E)) throw Error(ErrorCode::ShapeMismatch, "HVAC observation must have 9 entries");
  const double t_set = p.set_min + obs_e[8] * (p.set_max - p.set_min);
  double target = spec.fixed_setpoint;
  if (spec.hvac == HvacRule::OutdoorTracking) {
    const double t_out = obs_e[5] * 40.0;
    target = std::clamp(t_out + 2.0, 18.0, 27.0);
  }
  return step_toward(t_set, target);
}

inline int immediate_ls_action(std::span<const double> /*obs_ls*/) { return static_cast<int>(LsAction::Assign); }

inline int ci_threshold_bat_action(std::span<const double> obs_bat, const BaselineSpec& spec, const CiThresholds& th,
                                   const std::vector<bool>& mask = {}) {
  if (obs_bat.size() != obs_size(Agent::BAT)) throw Error(ErrorCode::ShapeMismatch, "battery observation must have 11 entries");
  const auto idle = static_cast<int>(BatteryAction::Idle);
  if (spec.bat == BatteryRule::AlwaysIdle) return idle;
  const double ci = obs_bat[6] * kCiRef;
  int a = idle;
  if (ci < th.low) a = static_cast<int>(BatteryAction::Charge);
  else if (ci > th.high) a = static_cast<int>(BatteryAction::Supply);
  if (!mask.empty() && !mask[static_cast<std::size_t>(a)]) return idle;
  return a;
}

/// Runs the baseline controller for one agent slot.
inline int baseline_action(Agent agent, const CoupledEnv& env, const BaselineSpec& spec, const CiThresholds& th) {
  const auto obs = env.observe(agent);
  switch (agent) {
    case Agent::LS: return immediate_ls_action(obs);
    case Agent::E: return rbc_hvac_action(obs, spec, env.config().thermal);
    case Agent::BAT: return ci_threshold_bat_action(obs, spec, th, env.mask(agent));
  }
  return 0;
}

}  // namespace dccfr
