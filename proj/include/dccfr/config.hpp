#pragma once

// JSON run configuration. Every key is optional; absent keys keep the defaults.
//
// {
//   "thermal": {"p_idle": 400, ...},
//   "load_shift": {"flex_fraction": 0.1, "u_max": 0.95, "deadline_hours": 24 | "inf", "w_pen": 0.1},
//   "battery": {"capacity": 600, ...},
//   "reward_weights": [[0.8,0.1,0.1],[0.1,0.8,0.1],[0.1,0.1,0.8]],
//   "lookahead_hours": 4,
//   "scales": {"co2_kg": 100, "cost_usd": 30},
//   "episode": {"steps": 2880, "discount": 0.99},
//   "baseline": {"hvac": "fixed" | "track", "setpoint": 22, "bat": "idle" | "ci_threshold", "low_pct": 25, "high_pct": 75},
//   "ppo": {"lr": 5e-5, ...},
//   "train": {"iterations": 105, "reward_scaling": "return_std" | "standardize" | "none", "augment_weather": true, "ou": {"theta": 0.1, "sigma": 0.4, "mu": 0}},
//   "tou": {...}
// }

#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>

#include "json.hpp"

#include "dccfr/baselines.hpp"
#include "dccfr/env.hpp"
#include "dccfr/ppo.hpp"
#include "dccfr/train.hpp"

namespace dccfr {

struct RunSettings {
  ThermalParams thermal;
  LsParams ls;
  BatteryParams bat;
  RewardWeights reward_weights = kDefaultRewardWeights;
  int lookahead_hours = 4;
  double co2_scale = 100.0;
  double cost_scale = 30.0;
  double discount = 0.99;
  BaselineSpec baseline;
  PpoHyper ppo;
  TrainOptions train{.iterations = 105};
  std::optional<TouSchedule> tou;  // replaces the bundle's tariff when set

  EnvConfig env_config(TraceBundle bundle) const {
    if (tou) bundle.tou = *tou;
    EnvConfig c;
    c.bundle = std::move(bundle);
    c.thermal = thermal;
    c.ls = ls;
    c.bat = bat;
    c.bat.dt = thermal.dt;
    c.lookahead_hours = lookahead_hours;
    c.reward_weights = reward_weights;
    c.co2_scale = co2_scale;
    c.cost_scale = cost_scale;
    c.discount = discount;
    c.validate();
    baseline.validate(thermal);
    return c;
  }
};

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline double read_hours(const nlohmann::json& v) {
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::ConfigInvalid, "deadline_hours must be a number or \"inf\"");
  }
  return v.get<double>();
}

}  // namespace detail

inline RunSettings parse_settings(const nlohmann::json& j) {
  RunSettings s;
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
  try {
    if (j.contains("thermal")) {
      const auto& t = j.at("thermal");
      auto& p = s.thermal;
      detail::read_opt(t, "p_idle", p.p_idle);
      detail::read_opt(t, "p_dyn", p.p_dyn);
      detail::read_opt(t, "k_fan", p.k_fan);
      detail::read_opt(t, "t_safe", p.t_safe);
      detail::read_opt(t, "c_th", p.c_th);
      detail::read_opt(t, "k_env", p.k_env);
      detail::read_opt(t, "k_p", p.k_p);
      detail::read_opt(t, "q_max", p.q_max);
      detail::read_opt(t, "cop0", p.cop0);
      detail::read_opt(t, "k_cop", p.k_cop);
      detail::read_opt(t, "cop_min", p.cop_min);
      detail::read_opt(t, "cop_max", p.cop_max);
      detail::read_opt(t, "set_min", p.set_min);
      detail::read_opt(t, "set_max", p.set_max);
      detail::read_opt(t, "dt", p.dt);
    }
    if (j.contains("load_shift")) {
      const auto& l = j.at("load_shift");
      detail::read_opt(l, "flex_fraction", s.ls.flex_fraction);
      detail::read_opt(l, "u_max", s.ls.u_max);
      if (l.contains("deadline_hours")) s.ls.deadline_hours = detail::read_hours(l.at("deadline_hours"));
      detail::read_opt(l, "w_pen", s.ls.w_pen);
    }
    if (j.contains("battery")) {
      const auto& b = j.at("battery");
      detail::read_opt(b, "capacity", s.bat.capacity);
      detail::read_opt(b, "soc_min", s.bat.soc_min);
      detail::read_opt(b, "p_max", s.bat.p_max);
      detail::read_opt(b, "eta_c", s.bat.eta_c);
      detail::read_opt(b, "eta_d", s.bat.eta_d);
    }
    detail::read_opt(j, "reward_weights", s.reward_weights);
    detail::read_opt(j, "lookahead_hours", s.lookahead_hours);
    if (j.contains("scales")) {
      detail::read_opt(j.at("scales"), "co2_kg", s.co2_scale);
      detail::read_opt(j.at("scales"), "cost_usd", s.cost_scale);
    }
    if (j.contains("episode")) {
      detail::read_opt(j.at("episode"), "steps", s.train.episode_steps);
      detail::read_opt(j.at("episode"), "discount", s.discount);
    }
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      if (b.contains("hvac")) {
        const auto h = b.at("hvac").get<std::string>();
        if (h == "fixed") s.baseline.hvac = HvacRule::FixedSetpoint;
        else if (h == "track") s.baseline.hvac = HvacRule::OutdoorTracking;
        else throw Error(ErrorCode::ConfigInvalid, "baseline.hvac must be \"fixed\" or \"track\"");
      }
      detail::read_opt(b, "setpoint", s.baseline.fixed_setpoint);
      if (b.contains("bat")) {
        const auto r = b.at("bat").get<std::string>();
        if (r == "idle") s.baseline.bat = BatteryRule::AlwaysIdle;
        else if (r == "ci_threshold") s.baseline.bat = BatteryRule::CiThreshold;
        else throw Error(ErrorCode::ConfigInvalid, "baseline.bat must be \"idle\" or \"ci_threshold\"");
      }
      detail::read_opt(b, "low_pct", s.baseline.low_pct);
      detail::read_opt(b, "high_pct", s.baseline.high_pct);
    }
    if (j.contains("ppo")) s.ppo = j.at("ppo").get<PpoHyper>();
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::read_opt(t, "iterations", s.train.iterations);
      detail::read_opt(t, "augment_weather", s.train.augment_weather);
      if (t.contains("reward_scaling")) s.train.reward_scaling = parse_reward_scaling(t.at("reward_scaling").get<std::string>());
      if (t.contains("ou")) {
        detail::read_opt(t.at("ou"), "theta", s.train.weather_noise.theta);
        detail::read_opt(t.at("ou"), "sigma", s.train.weather_noise.sigma);
        detail::read_opt(t.at("ou"), "mu", s.train.weather_noise.mu);
      }
    }
    if (j.contains("tou")) s.tou = parse_tou(j.at("tou"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
  s.thermal.validate();
  s.ls.validate();
  s.ppo.validate();
  s.train.weather_noise.validate();
  s.baseline.validate(s.thermal);
  if (s.train.iterations < 0) throw Error(ErrorCode::ConfigInvalid, "train.iterations must be >= 0");
  if (s.train.episode_steps == 0) throw Error(ErrorCode::ConfigInvalid, "episode.steps must be > 0");
  return s;
}

inline RunSettings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return parse_settings(j);
}

}  // namespace dccfr
