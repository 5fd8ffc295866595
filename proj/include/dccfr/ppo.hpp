#pragma once

// Categorical policies, generalized advantage estimation and the clipped
// surrogate update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dccfr/error.hpp"
#include "dccfr/nn.hpp"

namespace dccfr {

struct PpoHyper {
  double lr = 5e-5;
  double clip = 0.05;
  double entropy_coef = 0.05;
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs_per_update = 4;
  int minibatch = 256;
  double value_coef = 0.5;
  int rollout_len = 2880;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_grad_norm = 0.5;
  std::vector<int> hidden{128, 64, 16};

  void validate() const {
    if (!(clip > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ppo: clip must be > 0");
    if (!(gamma >= 0.0 && gamma <= 1.0 && lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "ppo: gamma and lambda must lie in [0,1]");
    if (!(lr > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ppo: lr must be > 0");
    if (epochs_per_update <= 0 || minibatch <= 0 || rollout_len <= 0) throw Error(ErrorCode::ConfigInvalid, "ppo: epochs, minibatch and rollout_len must be positive");
    if (!(entropy_coef >= 0.0 && value_coef >= 0.0 && max_grad_norm > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ppo: coefficients must be non-negative");
    for (int h : hidden) if (h <= 0) throw Error(ErrorCode::ConfigInvalid, "ppo: hidden sizes must be positive");
  }

  AdamConfig adam() const { return AdamConfig{lr, adam_beta1, adam_beta2, adam_eps}; }
};

inline void to_json(nlohmann::json& j, const PpoHyper& h) {
  j = nlohmann::json{{"lr", h.lr},
                     {"clip", h.clip},
                     {"entropy_coef", h.entropy_coef},
                     {"gamma", h.gamma},
                     {"lambda", h.lambda},
                     {"epochs_per_update", h.epochs_per_update},
                     {"minibatch", h.minibatch},
                     {"value_coef", h.value_coef},
                     {"rollout_len", h.rollout_len},
                     {"adam_betas", {h.adam_beta1, h.adam_beta2}},
                     {"adam_eps", h.adam_eps},
                     {"max_grad_norm", h.max_grad_norm},
                     {"hidden", h.hidden}};
}

inline void from_json(const nlohmann::json& j, PpoHyper& h) {
  h.lr = j.value("lr", h.lr);
  h.clip = j.value("clip", h.clip);
  h.entropy_coef = j.value("entropy_coef", h.entropy_coef);
  h.gamma = j.value("gamma", h.gamma);
  h.lambda = j.value("lambda", h.lambda);
  h.epochs_per_update = j.value("epochs_per_update", h.epochs_per_update);
  h.minibatch = j.value("minibatch", h.minibatch);
  h.value_coef = j.value("value_coef", h.value_coef);
  h.rollout_len = j.value("rollout_len", h.rollout_len);
  if (j.contains("adam_betas")) {
    h.adam_beta1 = j.at("adam_betas").at(0).get<double>();
    h.adam_beta2 = j.at("adam_betas").at(1).get<double>();
  }
  h.adam_eps = j.value("adam_eps", h.adam_eps);
  h.max_grad_norm = j.value("max_grad_norm", h.max_grad_norm);
  h.hidden = j.value("hidden", h.hidden);
}

// ---------------------------------------------------------------------------
// Masked categorical distribution

/// Log-probabilities with masked entries at -inf. An empty mask allows all.
inline std::vector<double> masked_log_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  if (!mask.empty() && mask.size() != logits.size()) throw Error(ErrorCode::ShapeMismatch, "mask and logits differ in size");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double mx = kNegInf;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask.empty() || mask[i]) mx = std::max(mx, logits[i]);
  }
  if (mx == kNegInf) throw Error(ErrorCode::AllMasked, "every action is masked");
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask.empty() || mask[i]) z += std::exp(logits[i] - mx);
  }
  const double log_z = mx + std::log(z);
  std::vector<double> out(logits.size(), kNegInf);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask.empty() || mask[i]) out[i] = logits[i] - log_z;
  }
  return out;
}

inline std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  auto lp = masked_log_softmax(logits, mask);
  for (double& v : lp) v = std::exp(v);  // exp(-inf) == 0 exactly
  return lp;
}

struct SampledAction {
  int index;
  double log_prob;
};

template <class Rng>
SampledAction sample_action(std::span<const double> logits, const std::vector<bool>& mask, Rng& rng) {
  const auto lp = masked_log_softmax(logits, mask);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double u = uni(rng);
  double acc = 0.0;
  int last_valid = -1;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (!std::isfinite(lp[i])) continue;
    last_valid = static_cast<int>(i);
    acc += std::exp(lp[i]);
    if (u < acc) return {static_cast<int>(i), lp[i]};
  }
  return {last_valid, lp[static_cast<std::size_t>(last_valid)]};
}

inline int greedy_action(std::span<const double> logits, const std::vector<bool>& mask) {
  int best = -1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best < 0 || logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  if (best < 0) throw Error(ErrorCode::AllMasked, "every action is masked");
  return best;
}

// ---------------------------------------------------------------------------
// Generalized advantage estimation

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t, with v_T = bootstrap;
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}.
inline AdvantageResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap_value,
                           const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw Error(ErrorCode::LengthMismatch, "rewards, values and dones must align");
  AdvantageResult r{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_v = (i + 1 < n) ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + gamma * next_v * not_done - values[i];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    r.advantages[i] = next_adv;
    r.returns[i] = next_adv + values[i];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rollout storage

struct RolloutBuffer {
  std::vector<std::vector<double>> obs;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<bool> dones;
  std::vector<double> log_probs;  // at collection time
  std::vector<double> values;     // at collection time
  std::vector<std::vector<bool>> masks;
  std::vector<double> next_obs_last;  // bootstrap state for the final entry

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }

  void push(std::vector<double> o, int a, double r, bool d, double lp, double v, std::vector<bool> m) {
    obs.push_back(std::move(o));
    actions.push_back(a);
    rewards.push_back(r);
    dones.push_back(d);
    log_probs.push_back(lp);
    values.push_back(v);
    masks.push_back(std::move(m));
  }

  void clear() { *this = RolloutBuffer{}; }

  void check_aligned() const {
    const std::size_t n = actions.size();
    if (obs.size() != n || rewards.size() != n || dones.size() != n || log_probs.size() != n || values.size() != n || masks.size() != n) {
      throw Error(ErrorCode::LengthMismatch, "rollout buffer columns are misaligned");
    }
  }
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

inline void to_json(nlohmann::json& j, const PpoStats& s) {
  j = nlohmann::json{{"policy_loss", s.policy_loss}, {"value_loss", s.value_loss}, {"entropy", s.entropy},
                     {"clip_fraction", s.clip_fraction}, {"approx_kl", s.approx_kl}};
}

inline double clip_fraction(std::span<const double> ratios, double clip) {
  if (ratios.empty()) return 0.0;
  std::size_t n = 0;
  for (double r : ratios) {
    if (r < 1.0 - clip || r > 1.0 + clip) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(ratios.size());
}

/// Policy and value network pair with their optimizers.
struct PpoAgent {
  Mlp policy;
  Mlp value;
  Adam policy_opt;
  Adam value_opt;
  PpoHyper hyper;

  PpoAgent() = default;
  PpoAgent(int obs_dim, int n_actions, const PpoHyper& h, std::mt19937_64& rng) : hyper(h) {
    std::vector<int> ps{obs_dim};
    ps.insert(ps.end(), h.hidden.begin(), h.hidden.end());
    std::vector<int> vs = ps;
    ps.push_back(n_actions);
    vs.push_back(1);
    policy = Mlp(ps, rng, 0.01);
    value = Mlp(vs, rng, 1.0);
    reset_optimizers();
  }

  void reset_optimizers() {
    policy_opt = Adam(policy, hyper.adam());
    value_opt = Adam(value, hyper.adam());
  }

  int obs_dim() const { return policy.input_size(); }
  int n_actions() const { return policy.output_size(); }

  struct Decision {
    int action;
    double log_prob;
    double value;
  };

  template <class Rng>
  Decision act(std::span<const double> obs, const std::vector<bool>& mask, Rng& rng) const {
    const Eigen::VectorXd logits = policy.forward(obs);
    const auto s = sample_action(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), mask, rng);
    return {s.index, s.log_prob, value.forward(obs)(0)};
  }

  int act_greedy(std::span<const double> obs, const std::vector<bool>& mask) const {
    const Eigen::VectorXd logits = policy.forward(obs);
    return greedy_action(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), mask);
  }

  double state_value(std::span<const double> obs) const { return value.forward(obs)(0); }
};

namespace detail {

inline void clip_global_norm(MlpGrad& g, double max_norm) {
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm && norm > 0.0) g.scale(max_norm / norm);
}

}  // namespace detail

/// Clipped-surrogate update over `epochs_per_update` shuffled minibatch
/// passes. `advantages` are normalized to zero mean and unit variance here
/// (batches of more than one sample).
/// The buffer is cleared on success.
template <class Rng>
PpoStats ppo_update(PpoAgent& agent, RolloutBuffer& buffer, std::span<const double> advantages,
                    std::span<const double> returns, Rng& rng) {
  const PpoHyper& h = agent.hyper;
  if (buffer.empty()) throw Error(ErrorCode::EmptyBuffer, "nothing to learn from");
  buffer.check_aligned();
  const std::size_t n = buffer.size();
  if (advantages.size() != n || returns.size() != n) throw Error(ErrorCode::LengthMismatch, "advantages/returns must match the buffer");
  const int obs_dim = agent.obs_dim();
  const int n_act = agent.n_actions();

  Eigen::MatrixXd all_obs(obs_dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(buffer.obs[i].size()) != obs_dim) throw Error(ErrorCode::ShapeMismatch, "observation size does not match policy input");
    all_obs.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(buffer.obs[i].data(), obs_dim);
  }

  std::vector<double> adv(advantages.begin(), advantages.end());
  if (n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  PpoStats stats;
  std::size_t batches = 0;
  std::size_t samples_seen = 0;
  std::size_t clipped = 0;
  const std::size_t mb = static_cast<std::size_t>(h.minibatch);

  for (int epoch = 0; epoch < h.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const auto bsz = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(obs_dim, bsz);
      for (Eigen::Index k = 0; k < bsz; ++k) x.col(k) = all_obs.col(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(k)]));

      Mlp::Cache pcache, vcache;
      const Eigen::MatrixXd logits = agent.policy.forward_batch(x, &pcache);
      const Eigen::MatrixXd values = agent.value.forward_batch(x, &vcache);

      Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n_act, bsz);
      Eigen::MatrixXd d_values(1, bsz);
      double p_loss = 0.0, v_loss = 0.0, ent_sum = 0.0, kl_sum = 0.0;
      const double inv_b = 1.0 / static_cast<double>(bsz);

      for (Eigen::Index k = 0; k < bsz; ++k) {
        const std::size_t i = order[start + static_cast<std::size_t>(k)];
        const auto& mask = buffer.masks[i];
        const std::span<const double> lg(logits.col(k).data(), static_cast<std::size_t>(n_act));
        const auto logp = masked_log_softmax(lg, mask);
        const int a = buffer.actions[i];
        const double logp_a = logp[static_cast<std::size_t>(a)];
        const double ratio = std::exp(logp_a - buffer.log_probs[i]);
        const double A = adv[i];
        const double clipped_ratio = std::clamp(ratio, 1.0 - h.clip, 1.0 + h.clip);
        const double surr1 = ratio * A;
        const double surr2 = clipped_ratio * A;
        p_loss += -std::min(surr1, surr2);
        if (ratio < 1.0 - h.clip || ratio > 1.0 + h.clip) ++clipped;
        kl_sum += buffer.log_probs[i] - logp_a;

        // d(-min(surr1, surr2))/d logp_a; zero when the clipped branch is active
        const double g_logp = (surr1 <= surr2) ? -A * ratio : 0.0;

        double entropy = 0.0;
        for (int j = 0; j < n_act; ++j) {
          if (std::isfinite(logp[static_cast<std::size_t>(j)])) entropy -= std::exp(logp[static_cast<std::size_t>(j)]) * logp[static_cast<std::size_t>(j)];
        }
        ent_sum += entropy;
        for (int j = 0; j < n_act; ++j) {
          const double lpj = logp[static_cast<std::size_t>(j)];
          if (!std::isfinite(lpj)) continue;  // masked: no gradient
          const double pj = std::exp(lpj);
          const double d_pg = g_logp * ((j == a ? 1.0 : 0.0) - pj);
          const double d_ent = h.entropy_coef * pj * (lpj + entropy);  // d(-c H)/dz_j
          d_logits(j, k) = (d_pg + d_ent) * inv_b;
        }

        const double err = values(0, k) - returns[i];
        v_loss += err * err;
        d_values(0, k) = h.value_coef * 2.0 * err * inv_b;
      }

      p_loss = p_loss * inv_b - h.entropy_coef * ent_sum * inv_b;
      v_loss *= inv_b;
      if (!std::isfinite(p_loss) || !std::isfinite(v_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss in PPO update");
      }

      MlpGrad pg = agent.policy.backward(pcache, d_logits);
      MlpGrad vg = agent.value.backward(vcache, d_values);
      if (!pg.all_finite() || !vg.all_finite()) throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient in PPO update");
      detail::clip_global_norm(pg, h.max_grad_norm);
      detail::clip_global_norm(vg, h.max_grad_norm);
      agent.policy_opt.step(agent.policy, pg);
      agent.value_opt.step(agent.value, vg);

      stats.policy_loss += p_loss;
      stats.value_loss += v_loss;
      stats.entropy += ent_sum * inv_b;
      stats.approx_kl += kl_sum * inv_b;
      samples_seen += static_cast<std::size_t>(bsz);
      ++batches;
    }
  }

  const double nb = static_cast<double>(batches);
  stats.policy_loss /= nb;
  stats.value_loss /= nb;
  stats.entropy /= nb;
  stats.approx_kl /= nb;
  stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(samples_seen);
  buffer.clear();
  return stats;
}

/// Computes advantages from a buffer's collection-time values and runs the update.
template <class Rng>
PpoStats ppo_update(PpoAgent& agent, RolloutBuffer& buffer, Rng& rng) {
  if (buffer.empty()) throw Error(ErrorCode::EmptyBuffer, "nothing to learn from");
  buffer.check_aligned();
  const double bootstrap = buffer.dones.back() || buffer.next_obs_last.empty() ? 0.0 : agent.state_value(buffer.next_obs_last);
  const auto adv = gae(buffer.rewards, buffer.values, bootstrap, buffer.dones, agent.hyper.gamma, agent.hyper.lambda);
  return ppo_update(agent, buffer, adv.advantages, adv.returns, rng);
}

}  // namespace dccfr
