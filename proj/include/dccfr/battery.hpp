#pragma once

#include <algorithm>
#include <array>

#include "dccfr/error.hpp"

namespace dccfr {

struct BatteryParams {
  double capacity = 600.0;  // kWh
  double soc_min = 60.0;    // kWh, UPS reserve
  double p_max = 300.0;     // kW
  double eta_c = 0.95;
  double eta_d = 0.95;
  double dt = 0.25;         // h

  void validate() const {
    if (!(soc_min >= 0.0 && soc_min < capacity)) throw Error(ErrorCode::ConfigInvalid, "battery: need 0 <= soc_min < capacity");
    if (!(p_max > 0.0)) throw Error(ErrorCode::ConfigInvalid, "battery: p_max must be > 0");
    if (!(eta_c > 0.0 && eta_c <= 1.0 && eta_d > 0.0 && eta_d <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "battery: efficiencies must lie in (0,1]");
    if (!(dt > 0.0)) throw Error(ErrorCode::ConfigInvalid, "battery: dt must be > 0");
  }
};

struct BatteryState {
  double soc = 300.0;
  double last_charge_kw = 0.0;
  double last_discharge_kw = 0.0;
};

enum class BatteryAction { Charge = 0, Supply = 1, Idle = 2 };

struct BatteryStepResult {
  BatteryState state;
  double grid_kw;
};

inline BatteryStepResult battery_step(const BatteryState& s, BatteryAction a, double facility_kw, const BatteryParams& p) {
  BatteryState next = s;
  next.last_charge_kw = 0.0;
  next.last_discharge_kw = 0.0;
  double grid_kw = facility_kw;
  switch (a) {
    case BatteryAction::Charge: {
      const double p_ch = std::max(0.0, std::min(p.p_max, (p.capacity - s.soc) / (p.eta_c * p.dt)));
      next.soc = std::min(p.capacity, s.soc + p.eta_c * p_ch * p.dt);
      next.last_charge_kw = p_ch;
      grid_kw = facility_kw + p_ch;
      break;
    }
    case BatteryAction::Supply: {
      const double p_dis = std::max(0.0, std::min({p.p_max, facility_kw, (s.soc - p.soc_min) * p.eta_d / p.dt}));
      next.soc = std::max(p.soc_min, s.soc - p_dis * p.dt / p.eta_d);
      next.last_discharge_kw = p_dis;
      grid_kw = facility_kw - p_dis;
      break;
    }
    case BatteryAction::Idle:
      break;
  }
  return {next, grid_kw};
}

constexpr double kSocEpsilon = 1e-6;  // kWh

/// Feasibility of {Charge, Supply, Idle}.
inline std::array<bool, 3> action_mask(const BatteryState& s, const BatteryParams& p) {
  return {s.soc < p.capacity - kSocEpsilon, s.soc > p.soc_min + kSocEpsilon, true};
}

}  // namespace dccfr
