#pragma once

// Concurrent rollout and independent PPO updates for the three agents.
// Agents outside the trained combination are driven by the baselines.

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "dccfr/baselines.hpp"
#include "dccfr/env.hpp"
#include "dccfr/ppo.hpp"

namespace dccfr {

struct Combo {
  std::array<bool, 3> trained{false, false, false};

  bool has(Agent a) const { return trained[index_of(a)]; }
  bool any() const { return trained[0] || trained[1] || trained[2]; }
  int count() const { return int(trained[0]) + int(trained[1]) + int(trained[2]); }

  std::string label() const {
    if (count() == 3) return "ALL";
    std::string s;
    for (Agent a : kAgents) {
      if (!has(a)) continue;
      if (!s.empty()) s += "+";
      s += to_string(a);
    }
    return s.empty() ? "BASELINE" : s;
  }
};

inline const std::array<std::string, 7>& combo_labels() {
  static const std::array<std::string, 7> labels{"LS", "EO", "BAT", "LS+EO", "LS+BAT", "EO+BAT", "ALL"};
  return labels;
}

inline Combo parse_combo(std::string_view s) {
  if (s == "ALL") return Combo{{true, true, true}};
  if (s == "BASELINE") return Combo{};
  Combo c;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto plus = s.find('+', pos);
    const auto part = s.substr(pos, plus == std::string_view::npos ? std::string_view::npos : plus - pos);
    if (part == "LS") c.trained[0] = true;
    else if (part == "EO" || part == "E") c.trained[1] = true;
    else if (part == "BAT") c.trained[2] = true;
    else throw Error(ErrorCode::ConfigInvalid, "unknown combo '" + std::string(s) + "' (expected one of LS, EO, BAT, LS+EO, LS+BAT, EO+BAT, ALL)");
    if (plus == std::string_view::npos) break;
    pos = plus + 1;
  }
  return c;
}

/// How rewards are rescaled before the PPO update. The environment's rewards
/// and the logged metrics are never modified.
enum class RewardScaling {
  None,
  Standardize,  // (r - running mean) / running std of r
  ReturnStd,    // r / running std of the discounted return
};

inline RewardScaling parse_reward_scaling(std::string_view s) {
  if (s == "none") return RewardScaling::None;
  if (s == "standardize") return RewardScaling::Standardize;
  if (s == "return_std") return RewardScaling::ReturnStd;
  throw Error(ErrorCode::ConfigInvalid, "reward scaling must be none, standardize or return_std");
}

struct TrainOptions {
  int iterations = 0;  // learning-iteration budget
  std::size_t episode_steps = 2880;
  RewardScaling reward_scaling = RewardScaling::ReturnStd;
  bool augment_weather = true;
  OuParams weather_noise{};
  std::uint64_t seed = 0;
};

struct IterationLog {
  int iteration = 0;
  std::size_t env_steps = 0;  // cumulative
  int episodes = 0;           // completed during this iteration
  double co2_tonnes = 0.0;    // mean over completed episodes
  double energy_mwh = 0.0;
  double cost_usd = 0.0;
  std::array<double, 3> mean_reward{};
  std::array<std::optional<PpoStats>, 3> stats;
};

inline void to_json(nlohmann::json& j, const IterationLog& l) {
  j = nlohmann::json{{"iteration", l.iteration}, {"env_steps", l.env_steps}, {"episodes", l.episodes},
                     {"co2_tonnes", l.co2_tonnes}, {"energy_mwh", l.energy_mwh}, {"cost_usd", l.cost_usd}};
  nlohmann::json agents = nlohmann::json::object();
  for (Agent a : kAgents) {
    const auto& s = l.stats[index_of(a)];
    if (!s) continue;
    nlohmann::json aj = *s;
    aj["mean_reward"] = l.mean_reward[index_of(a)];
    agents[std::string(to_string(a))] = std::move(aj);
  }
  j["agents"] = std::move(agents);
}

/// Running mean/variance (Welford) used for reward scaling.
class RunningMoments {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  double mean() const { return mean_; }
  double stddev() const { return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 1.0; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct TrainResult {
  std::array<std::optional<PpoAgent>, 3> agents;
  std::vector<IterationLog> log;
};

using IterationCallback = std::function<void(const IterationLog&, const TrainResult&)>;

inline TrainResult train(const EnvConfig& base_cfg, const PpoHyper& hyper, const TrainOptions& opt, const Combo& combo,
                         const BaselineSpec& baseline, const IterationCallback& on_iteration = {}) {
  hyper.validate();
  if (!combo.any()) throw Error(ErrorCode::ConfigInvalid, "train needs at least one agent in the combination");
  if (opt.iterations < 0) throw Error(ErrorCode::ConfigInvalid, "iterations must be >= 0");

  std::mt19937_64 rng(opt.seed);
  TrainResult result;
  for (Agent a : kAgents) {
    if (combo.has(a)) {
      std::mt19937_64 init_rng(detail::stream_seed(opt.seed, 100 + index_of(a)));
      result.agents[index_of(a)].emplace(static_cast<int>(obs_size(a)), static_cast<int>(action_count(a)), hyper, init_rng);
    }
  }
  if (opt.iterations == 0) return result;

  EnvConfig cfg = base_cfg;
  cfg.episode_steps = std::min(opt.episode_steps, cfg.bundle.size());
  cfg.start_step = 0;
  cfg.discount = hyper.gamma;
  const TimeSeries clean_weather = cfg.bundle.weather;
  CoupledEnv env(cfg);
  const CiThresholds th = ci_thresholds(cfg.bundle.ci, baseline);
  baseline.validate(cfg.thermal);

  struct Decision {
    double log_prob;
    double value;
    std::vector<bool> mask;
  };
  std::array<std::deque<Decision>, 3> decisions;
  std::array<RolloutBuffer, 3> buffers;
  std::array<RunningMoments, 3> reward_moments;
  std::array<RunningMoments, 3> return_moments;
  std::array<double, 3> running_return{};

  std::size_t env_steps = 0;
  std::uint64_t episode_index = 0;
  bool need_reset = true;
  std::vector<StepMetrics> episode_metrics;
  const std::size_t max_start = cfg.bundle.size() - cfg.episode_steps;

  for (int it = 0; it < opt.iterations; ++it) {
    IterationLog log;
    log.iteration = it;
    double co2_sum = 0.0, energy_sum = 0.0, cost_sum = 0.0;
    std::array<double, 3> reward_sum{};
    std::array<std::size_t, 3> reward_n{};

    const auto rollout_full = [&] {
      for (Agent a : kAgents) {
        if (combo.has(a) && buffers[index_of(a)].size() < static_cast<std::size_t>(hyper.rollout_len)) return false;
      }
      return true;
    };

    while (!rollout_full()) {
      if (need_reset) {
        std::uniform_int_distribution<std::size_t> start_dist(0, max_start);
        const std::size_t start = start_dist(rng);
        if (opt.augment_weather) {
          env.set_weather(ou_augment(clean_weather, opt.weather_noise, detail::stream_seed(opt.seed, 1000 + episode_index)));
        }
        env.reset(start);
        ++episode_index;
        episode_metrics.clear();
        need_reset = false;
      }

      JointAction actions{};
      for (Agent a : kAgents) {
        const std::size_t i = index_of(a);
        if (combo.has(a)) {
          const auto obs = env.observe(a);
          auto mask = env.mask(a);
          const auto d = result.agents[i]->act(obs, mask, rng);
          actions[i] = d.action;
          decisions[i].push_back(Decision{d.log_prob, d.value, std::move(mask)});
        } else {
          actions[i] = baseline_action(a, env, baseline, th);
        }
      }

      StepResult sr = env.step(actions);
      ++env_steps;
      episode_metrics.push_back(sr.metrics);

      for (auto& tr : sr.transitions) {
        const std::size_t i = index_of(tr.agent);
        if (!combo.has(tr.agent)) continue;
        Decision d = std::move(decisions[i].front());
        decisions[i].pop_front();
        reward_sum[i] += tr.reward;
        ++reward_n[i];
        double r = tr.reward;
        if (opt.reward_scaling == RewardScaling::ReturnStd) {
          running_return[i] = running_return[i] * tr.gamma + tr.reward;
          return_moments[i].add(running_return[i]);
          r = tr.reward / (return_moments[i].stddev() + 1e-8);
          if (tr.done) running_return[i] = 0.0;
        }
        buffers[i].push(std::move(tr.obs), tr.action, r, tr.done, d.log_prob, d.value, std::move(d.mask));
        buffers[i].next_obs_last = std::move(tr.next_obs);
      }

      if (sr.done) {
        const auto tot = episode_totals(episode_metrics);
        co2_sum += tot.co2_tonnes;
        energy_sum += tot.energy_mwh;
        cost_sum += tot.cost_usd;
        ++log.episodes;
        need_reset = true;
      }
    }

    // Concurrent policy updates: each trained agent learns from its own buffer.
    for (Agent a : kAgents) {
      const std::size_t i = index_of(a);
      if (!combo.has(a)) continue;
      auto& buf = buffers[i];
      if (opt.reward_scaling == RewardScaling::Standardize) {
        for (double r : buf.rewards) reward_moments[i].add(r);
        const double mu = reward_moments[i].mean();
        const double sd = reward_moments[i].stddev() + 1e-8;
        for (double& r : buf.rewards) r = (r - mu) / sd;
      }
      log.stats[i] = ppo_update(*result.agents[i], buf, rng);
      log.mean_reward[i] = reward_n[i] ? reward_sum[i] / static_cast<double>(reward_n[i]) : 0.0;
    }

    log.env_steps = env_steps;
    if (log.episodes > 0) {
      log.co2_tonnes = co2_sum / log.episodes;
      log.energy_mwh = energy_sum / log.episodes;
      log.cost_usd = cost_sum / log.episodes;
    }
    result.log.push_back(log);
    if (on_iteration) on_iteration(result.log.back(), result);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: {agent, layer_sizes, weights, biases, value: {...}, hyper, seed, iteration}

inline nlohmann::json checkpoint_to_json(Agent agent, const PpoAgent& a, std::uint64_t seed, int iteration) {
  nlohmann::json j = mlp_to_json(a.policy);
  j["agent"] = std::string(to_string(agent));
  j["value"] = mlp_to_json(a.value);
  j["hyper"] = a.hyper;
  j["seed"] = seed;
  j["iteration"] = iteration;
  return j;
}

inline PpoAgent checkpoint_from_json(const nlohmann::json& j, Agent expected) {
  PpoAgent a;
  try {
    if (j.contains("agent") && j.at("agent").get<std::string>() != to_string(expected)) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint is for agent " + j.at("agent").get<std::string>());
    }
    a.policy = mlp_from_json(j);
    a.value = mlp_from_json(j.at("value"));
    if (j.contains("hyper")) a.hyper = j.at("hyper").get<PpoHyper>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("malformed checkpoint: ") + e.what());
  }
  if (a.policy.input_size() != static_cast<int>(obs_size(expected)) || a.policy.output_size() != static_cast<int>(action_count(expected)) ||
      a.value.input_size() != static_cast<int>(obs_size(expected)) || a.value.output_size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, std::string(to_string(expected)) + " checkpoint does not match the observation/action layout");
  }
  a.reset_optimizers();
  return a;
}

}  // namespace dccfr
