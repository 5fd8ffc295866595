#pragma once

// Lumped-parameter data center surrogate: IT power with a server-fan
// penalty, proportional cooling with a temperature-dependent COP, and
// first-order zone dynamics integrated with explicit Euler.

#include <algorithm>
#include <cmath>
#include <string>

#include "dccfr/error.hpp"

namespace dccfr {

struct ThermalParams {
  double p_idle = 400.0;   // kW
  double p_dyn = 600.0;    // kW
  double k_fan = 5.0;      // kW / degC^2
  double t_safe = 25.0;    // degC
  double c_th = 40.0;      // kWh / degC
  double k_env = 10.0;     // kW / degC
  double k_p = 200.0;      // kW_th / degC
  double q_max = 1500.0;   // kW_th
  double cop0 = 6.0;
  double k_cop = 0.3;      // 1 / degC
  double cop_min = 1.5;
  double cop_max = 9.0;
  double set_min = 15.0;   // degC
  double set_max = 27.0;   // degC
  double dt = 0.25;        // h

  void validate() const {
    // p_idle = 0 is allowed so that equilibrium probes can switch off the heat source.
    const bool positive = p_idle >= 0.0 && p_dyn > 0.0 && k_fan >= 0.0 && t_safe > 0.0 && c_th > 0.0 && k_env >= 0.0 &&
                          k_p > 0.0 && q_max > 0.0 && cop0 > 0.0 && k_cop >= 0.0 && cop_min > 0.0 && cop_max > 0.0 &&
                          set_min > 0.0 && set_max > 0.0 && dt > 0.0;
    if (!positive) throw Error(ErrorCode::ConfigInvalid, "thermal parameters must be positive");
    if (!(set_min < set_max)) throw Error(ErrorCode::ConfigInvalid, "thermal: set_min must be < set_max");
    if (!(cop_min <= cop0 && cop0 <= cop_max)) throw Error(ErrorCode::ConfigInvalid, "thermal: need cop_min <= cop0 <= cop_max");
  }
};

struct DcState {
  double t_zone = 22.0;
  double t_set = 22.0;
  double p_it = 0.0;
  double p_hvac = 0.0;
  double e_step = 0.0;  // kWh drawn by IT + HVAC over the last step
};

enum class SetpointAction { Down = 0, Hold = 1, Up = 2 };

inline double it_power(double u, double t_zone, const ThermalParams& p) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorCode::BadUtilization, "utilization " + std::to_string(u) + " outside [0,1]");
  const double excess = std::max(0.0, t_zone - p.t_safe);
  return p.p_idle + p.p_dyn * u + p.k_fan * excess * excess;
}

inline double cop(double t_out, double t_set, const ThermalParams& p) {
  return std::clamp(p.cop0 - p.k_cop * (t_out - t_set), p.cop_min, p.cop_max);
}

struct HvacOutput {
  double q_cool;  // kW thermal
  double p_hvac;  // kW electric
};

inline HvacOutput hvac_step(double t_zone, double t_set, double t_out, const ThermalParams& p) {
  const double q = std::min(p.q_max, p.k_p * std::max(0.0, t_zone - t_set));
  return {q, q / cop(t_out, t_set, p)};
}

inline DcState zone_step(const DcState& s, double u, double t_out, const ThermalParams& p) {
  DcState next = s;
  next.p_it = it_power(u, s.t_zone, p);
  const auto hvac = hvac_step(s.t_zone, s.t_set, t_out, p);
  next.p_hvac = hvac.p_hvac;
  next.t_zone = s.t_zone + (p.dt / p.c_th) * (next.p_it + p.k_env * (t_out - s.t_zone) - hvac.q_cool);
  next.e_step = (next.p_it + next.p_hvac) * p.dt;
  return next;
}

inline double apply_setpoint_action(double t_set, SetpointAction a, const ThermalParams& p) {
  double next = t_set;
  if (a == SetpointAction::Down) next -= 1.0;
  if (a == SetpointAction::Up) next += 1.0;
  return std::clamp(next, p.set_min, p.set_max);
}

}  // namespace dccfr
