#pragma once

// Three-agent data center environment. Within a step the agents act in the
// order load shifter -> HVAC -> battery; each agent's transition is handed
// back one step late so its reward reflects every agent's action.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dccfr/battery.hpp"
#include "dccfr/error.hpp"
#include "dccfr/exogenous.hpp"
#include "dccfr/load_shift.hpp"
#include "dccfr/thermal.hpp"

namespace dccfr {

enum class Agent { LS = 0, E = 1, BAT = 2 };
inline constexpr std::array<Agent, 3> kAgents{Agent::LS, Agent::E, Agent::BAT};

inline constexpr std::size_t index_of(Agent a) { return static_cast<std::size_t>(a); }

inline std::string_view to_string(Agent a) {
  switch (a) {
    case Agent::LS: return "LS";
    case Agent::E: return "EO";
    case Agent::BAT: return "BAT";
  }
  return "?";
}

inline constexpr std::size_t obs_size(Agent a) {
  switch (a) {
    case Agent::LS: return 14;
    case Agent::E: return 9;
    case Agent::BAT: return 11;
  }
  return 0;
}

inline constexpr std::size_t action_count(Agent a) { return a == Agent::LS ? 2 : 3; }

using RewardWeights = std::array<std::array<double, 3>, 3>;

inline constexpr RewardWeights kDefaultRewardWeights{{{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}}};

constexpr double kEnergyRef = 300.0;  // kWh: 1.2 MWh per hour over a 15 min step
constexpr double kCiRef = 500.0;      // gCO2/kWh

struct EnvConfig {
  TraceBundle bundle;
  ThermalParams thermal;
  LsParams ls;
  BatteryParams bat;
  int lookahead_hours = 4;
  RewardWeights reward_weights = kDefaultRewardWeights;
  double co2_scale = 100.0;   // kg
  double cost_scale = 30.0;   // $
  std::size_t episode_steps = 0;  // 0: run to the end of the bundle
  std::size_t start_step = 0;
  double discount = 0.99;
  std::uint64_t seed = 0;

  std::size_t effective_episode_steps() const {
    return episode_steps == 0 ? bundle.size() - std::min(start_step, bundle.size()) : episode_steps;
  }

  void validate() const {
    bundle.validate();
    thermal.validate();
    ls.validate();
    bat.validate();
    if (bundle.step_minutes() * 60 != static_cast<int>(std::lround(thermal.dt * 3600.0)) ||
        std::abs(thermal.dt - bat.dt) > 1e-12) {
      throw Error(ErrorCode::ConfigInvalid, "trace step, thermal dt and battery dt must agree");
    }
    if (lookahead_hours < 0) throw Error(ErrorCode::ConfigInvalid, "lookahead_hours must be >= 0");
    for (const auto& row : reward_weights) {
      if (std::abs(row[0] + row[1] + row[2] - 1.0) > 1e-12) throw Error(ErrorCode::ConfigInvalid, "each reward weight row must sum to 1");
    }
    if (!(co2_scale > 0.0 && cost_scale > 0.0)) throw Error(ErrorCode::ConfigInvalid, "reward scales must be > 0");
    if (!(discount >= 0.0 && discount <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "discount must lie in [0,1]");
    const std::size_t steps = effective_episode_steps();
    if (steps == 0 || start_step + steps > bundle.size()) throw Error(ErrorCode::ConfigInvalid, "episode does not fit the trace");
  }
};

struct StepMetrics {
  std::size_t t = 0;
  double e_fac = 0.0;   // kWh
  double e_grid = 0.0;  // kWh
  double co2_kg = 0.0;
  double cost_usd = 0.0;
  double penalty = 0.0;
  double t_zone = 0.0;  // after the step
  double t_set = 0.0;
  double t_out = 0.0;
  double u_exec = 0.0;
  double queue = 0.0;   // utilization-steps after the step
  double soc = 0.0;     // kWh after the step
  double ci = 0.0;
  double price = 0.0;
  // diagnostics
  double e_it = 0.0;
  double e_hvac = 0.0;
  double executed = 0.0;
  double overdue = 0.0;
  double charge_kw = 0.0;
  double discharge_kw = 0.0;
  int a_ls = 0;
  int a_e = 0;
  int a_bat = 0;
};

inline void to_json(nlohmann::json& j, const StepMetrics& m) {
  j = nlohmann::json{{"t", m.t},           {"e_fac", m.e_fac},   {"e_grid", m.e_grid},     {"co2_kg", m.co2_kg},
                     {"cost_usd", m.cost_usd}, {"penalty", m.penalty}, {"t_zone", m.t_zone}, {"t_set", m.t_set},
                     {"t_out", m.t_out},   {"u_exec", m.u_exec}, {"queue", m.queue},       {"soc", m.soc},
                     {"ci", m.ci},         {"price", m.price},   {"e_it", m.e_it},         {"e_hvac", m.e_hvac},
                     {"executed", m.executed}, {"overdue", m.overdue}, {"charge_kw", m.charge_kw},
                     {"discharge_kw", m.discharge_kw}, {"a_ls", m.a_ls}, {"a_e", m.a_e}, {"a_bat", m.a_bat}};
}

inline void from_json(const nlohmann::json& j, StepMetrics& m) {
  j.at("t").get_to(m.t);
  j.at("e_fac").get_to(m.e_fac);
  j.at("e_grid").get_to(m.e_grid);
  j.at("co2_kg").get_to(m.co2_kg);
  j.at("cost_usd").get_to(m.cost_usd);
  j.at("penalty").get_to(m.penalty);
  j.at("t_zone").get_to(m.t_zone);
  j.at("t_set").get_to(m.t_set);
  j.at("t_out").get_to(m.t_out);
  j.at("u_exec").get_to(m.u_exec);
  j.at("queue").get_to(m.queue);
  j.at("soc").get_to(m.soc);
  j.at("ci").get_to(m.ci);
  j.at("price").get_to(m.price);
  m.e_it = j.value("e_it", 0.0);
  m.e_hvac = j.value("e_hvac", 0.0);
  m.executed = j.value("executed", 0.0);
  m.overdue = j.value("overdue", 0.0);
  m.charge_kw = j.value("charge_kw", 0.0);
  m.discharge_kw = j.value("discharge_kw", 0.0);
  m.a_ls = j.value("a_ls", 0);
  m.a_e = j.value("a_e", 0);
  m.a_bat = j.value("a_bat", 0);
}

struct Transition {
  Agent agent = Agent::LS;
  std::vector<double> obs;
  int action = 0;
  std::vector<double> next_obs;
  double reward = 0.0;
  double gamma = 0.99;
  bool done = false;
};

using Observations = std::array<std::vector<double>, 3>;
using JointAction = std::array<int, 3>;
using RewardVector = std::array<double, 3>;

struct EnvState {
  std::size_t t = 0;  // absolute index into the bundle
  std::size_t steps_taken = 0;
  DcState dc;
  FlexQueue queue;
  BatteryState bat;
  double u_exec_prev = 0.0;

  struct Pending {
    std::vector<double> obs;
    int action = 0;
    double reward = 0.0;
  };
  std::array<std::optional<Pending>, 3> pending;
};

struct StepResult {
  Observations next_obs;
  RewardVector rewards{};      // blended
  RewardVector raw_rewards{};  // r_LS, r_E, r_BAT
  StepMetrics metrics;
  bool done = false;
  std::vector<Transition> transitions;
};

// Rows sum to one, so sum_k w_ik r_k = r_i + sum_{k != i} w_ik (r_k - r_i). The
// second form returns r exactly when all raw rewards equal r.
inline RewardVector blend_rewards(const RewardVector& raw, const RewardWeights& w) {
  RewardVector out{};
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != i) s += w[i][k] * (raw[k] - raw[i]);
    }
    out[i] = raw[i] + s;
  }
  return out;
}

/// sin/cos of hour-of-day and day-of-year.
inline std::array<double, 4> time_features(Timestamp t) {
  using std::numbers::pi;
  const double h = hour_of_day(t);
  const double d = static_cast<double>(day_of_year(t));
  return {std::sin(2.0 * pi * h / 24.0), std::cos(2.0 * pi * h / 24.0), std::sin(2.0 * pi * d / 365.0),
          std::cos(2.0 * pi * d / 365.0)};
}

class CoupledEnv {
 public:
  explicit CoupledEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    steps_per_hour_ = 60 / cfg_.bundle.step_minutes();
    reset();
  }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  bool done() const { return state_.steps_taken >= cfg_.effective_episode_steps(); }

  /// Restarts at `start_step`; the next episode may begin elsewhere.
  Observations reset(std::optional<std::size_t> start_step = std::nullopt) {
    if (start_step) {
      if (*start_step + cfg_.effective_episode_steps() > cfg_.bundle.size()) {
        throw Error(ErrorCode::ConfigInvalid, "episode does not fit the trace");
      }
      cfg_.start_step = *start_step;
    }
    state_ = EnvState{};
    state_.t = cfg_.start_step;
    state_.dc = DcState{22.0, 22.0, cfg_.thermal.p_idle, 0.0, 0.0};
    state_.bat = BatteryState{cfg_.bat.capacity / 2.0, 0.0, 0.0};
    return observe_all();
  }

  /// Replaces the exogenous weather (e.g. with a noise-augmented copy).
  void set_weather(TimeSeries weather) {
    TraceBundle b = cfg_.bundle;
    b.weather = std::move(weather);
    b.validate();
    cfg_.bundle = std::move(b);
  }

  std::vector<double> observe(Agent agent) const {
    const std::size_t idx = std::min(state_.t, cfg_.bundle.size() - 1);
    const auto tf = time_features(cfg_.bundle.time_at(idx));
    std::vector<double> o(tf.begin(), tf.end());
    o.reserve(obs_size(agent));
    const double e_prev = state_.dc.e_step / kEnergyRef;
    const double soc = state_.bat.soc / cfg_.bat.capacity;
    const auto push_ci = [&] {
      for (double c : ci_window(cfg_.bundle.ci, idx, cfg_.lookahead_hours)) o.push_back(c / kCiRef);
    };
    switch (agent) {
      case Agent::LS:
        o.push_back(state_.dc.t_zone / 30.0);
        o.push_back(state_.u_exec_prev);
        o.push_back(std::min(state_.queue.total().units(), 10.0) / 10.0);
        o.push_back(e_prev);
        push_ci();
        o.push_back(soc);
        break;
      case Agent::E:
        o.push_back(state_.dc.t_zone / 30.0);
        o.push_back(cfg_.bundle.weather[idx] / 40.0);
        o.push_back(e_prev);
        o.push_back(state_.u_exec_prev);
        o.push_back((state_.dc.t_set - cfg_.thermal.set_min) / (cfg_.thermal.set_max - cfg_.thermal.set_min));
        break;
      case Agent::BAT:
        o.push_back(e_prev);
        o.push_back(soc);
        push_ci();
        break;
    }
    return o;
  }

  Observations observe_all() const { return {observe(Agent::LS), observe(Agent::E), observe(Agent::BAT)}; }

  std::vector<bool> mask(Agent agent) const {
    if (agent == Agent::BAT) {
      const auto m = action_mask(state_.bat, cfg_.bat);
      return {m[0], m[1], m[2]};
    }
    return std::vector<bool>(action_count(agent), true);
  }

  StepResult step(const JointAction& a) {
    if (done()) throw Error(ErrorCode::InvalidAction, "episode already finished; call reset()");
    for (Agent ag : kAgents) {
      const int act = a[index_of(ag)];
      if (act < 0 || act >= static_cast<int>(action_count(ag))) {
        throw Error(ErrorCode::InvalidAction, std::string(to_string(ag)) + " action " + std::to_string(act) + " out of range");
      }
    }
    if (!mask(Agent::BAT)[static_cast<std::size_t>(a[2])]) {
      throw Error(ErrorCode::MaskedAction, "battery action " + std::to_string(a[2]) + " infeasible at soc " + std::to_string(state_.bat.soc));
    }

    const Observations obs_now = observe_all();
    const std::size_t t = state_.t;
    const Timestamp when = cfg_.bundle.time_at(t);
    const double dt = cfg_.thermal.dt;

    // (1)-(2) load shifting
    const auto split = split_arrivals(cfg_.bundle.workload[t], cfg_.ls);
    auto qs = queue_step(std::move(state_.queue), static_cast<LsAction>(a[0]), split.base_u, split.flex_arrival,
                         static_cast<std::int64_t>(t), cfg_.ls, steps_per_hour_);
    state_.queue = std::move(qs.queue);

    // (3) HVAC and thermal zone
    const double t_out = cfg_.bundle.weather[t];
    state_.dc.t_set = apply_setpoint_action(state_.dc.t_set, static_cast<SetpointAction>(a[1]), cfg_.thermal);
    state_.dc = zone_step(state_.dc, qs.u_exec, t_out, cfg_.thermal);
    const double e_fac = state_.dc.e_step;

    // (4) battery
    const auto bs = battery_step(state_.bat, static_cast<BatteryAction>(a[2]), e_fac / dt, cfg_.bat);
    state_.bat = bs.state;
    const double e_grid = bs.grid_kw * dt;

    // (5) accounting
    StepMetrics m;
    m.t = t;
    m.e_fac = e_fac;
    m.e_grid = e_grid;
    m.ci = cfg_.bundle.ci[t];
    m.price = price_at(cfg_.bundle.tou, when);
    m.co2_kg = m.ci * e_grid / 1000.0;
    m.cost_usd = m.price * e_grid;
    m.penalty = qs.penalty;
    m.t_zone = state_.dc.t_zone;
    m.t_set = state_.dc.t_set;
    m.t_out = t_out;
    m.u_exec = qs.u_exec;
    m.queue = state_.queue.total().units();
    m.soc = state_.bat.soc;
    m.e_it = state_.dc.p_it * dt;
    m.e_hvac = state_.dc.p_hvac * dt;
    m.executed = qs.executed.units();
    m.overdue = qs.overdue.units();
    m.charge_kw = bs.state.last_charge_kw;
    m.discharge_kw = bs.state.last_discharge_kw;
    m.a_ls = a[0];
    m.a_e = a[1];
    m.a_bat = a[2];

    // (6)-(7) rewards
    StepResult r;
    r.raw_rewards = {-(m.co2_kg / cfg_.co2_scale + m.penalty), -(e_fac * m.price / cfg_.cost_scale),
                     -(m.co2_kg / cfg_.co2_scale)};
    r.rewards = blend_rewards(r.raw_rewards, cfg_.reward_weights);
    r.metrics = m;

    // (8) complete the transitions left pending by the previous step
    for (Agent ag : kAgents) {
      auto& slot = state_.pending[index_of(ag)];
      if (slot) {
        r.transitions.push_back(Transition{ag, std::move(slot->obs), slot->action, obs_now[index_of(ag)], slot->reward,
                                           cfg_.discount, false});
      }
      slot = EnvState::Pending{obs_now[index_of(ag)], a[index_of(ag)], r.rewards[index_of(ag)]};
    }

    // (9) advance
    state_.u_exec_prev = qs.u_exec;
    ++state_.t;
    ++state_.steps_taken;
    r.done = done();
    r.next_obs = observe_all();
    if (r.done) {
      for (Agent ag : kAgents) {
        auto& slot = state_.pending[index_of(ag)];
        r.transitions.push_back(Transition{ag, std::move(slot->obs), slot->action, r.next_obs[index_of(ag)],
                                           slot->reward, cfg_.discount, true});
        slot.reset();
      }
    }
    return r;
  }

 private:
  EnvConfig cfg_;
  EnvState state_;
  int steps_per_hour_ = 4;
};

struct EpisodeTotals {
  double co2_tonnes = 0.0;
  double energy_mwh = 0.0;  // facility energy
  double cost_usd = 0.0;
};

inline EpisodeTotals episode_totals(std::span<const StepMetrics> metrics) {
  if (metrics.empty()) throw Error(ErrorCode::Empty, "no step metrics");
  EpisodeTotals tot;
  double co2_kg = 0.0, e_kwh = 0.0;
  for (const auto& m : metrics) {
    co2_kg += m.co2_kg;
    e_kwh += m.e_fac;
    tot.cost_usd += m.cost_usd;
  }
  tot.co2_tonnes = co2_kg / 1000.0;
  tot.energy_mwh = e_kwh / 1000.0;
  return tot;
}

}  // namespace dccfr
