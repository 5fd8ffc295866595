#pragma once

// Small dense networks with tanh hidden layers, exact backpropagation and
// an Adam optimizer. Batches are stored column-wise (features x samples).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dccfr/error.hpp"

namespace dccfr {

struct MlpGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : biases) s += b.squaredNorm();
    return s;
  }
  void scale(double f) {
    for (auto& w : weights) w *= f;
    for (auto& b : biases) b *= f;
  }
  bool all_finite() const {
    for (const auto& w : weights) if (!w.allFinite()) return false;
    for (const auto& b : biases) if (!b.allFinite()) return false;
    return true;
  }
};

class Mlp {
 public:
  Mlp() = default;

  /// LeCun-normal weights, zero biases; the output layer is scaled by `output_gain`.
  Mlp(std::vector<int> layer_sizes, std::mt19937_64& rng, double output_gain = 1.0) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw Error(ErrorCode::ShapeMismatch, "an MLP needs at least input and output sizes");
    for (int s : sizes_) if (s <= 0) throw Error(ErrorCode::ShapeMismatch, "layer sizes must be positive");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double std_dev = std::sqrt(1.0 / in) * (l + 2 == sizes_.size() ? output_gain : 1.0);
      Eigen::MatrixXd w(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) w(r, c) = std_dev * normal(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  static Mlp zeros(std::vector<int> layer_sizes) {
    Mlp m;
    m.sizes_ = std::move(layer_sizes);
    for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
      m.weights_.push_back(Eigen::MatrixXd::Zero(m.sizes_[l + 1], m.sizes_[l]));
      m.biases_.push_back(Eigen::VectorXd::Zero(m.sizes_[l + 1]));
    }
    return m;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t layers() const { return weights_.size(); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  Eigen::VectorXd forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_size()) {
      throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.size()) + " entries, network expects " + std::to_string(input_size()));
    }
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (!a.allFinite()) throw Error(ErrorCode::NonFinite, "non-finite network input");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::VectorXd z = weights_[l] * a + biases_[l];
      a = (l + 1 < weights_.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
    }
    return a;
  }

  /// Activations per layer; activations[0] is the input batch.
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;
  };

  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    if (x.rows() != input_size()) throw Error(ErrorCode::ShapeMismatch, "batch row count does not match network input");
    Eigen::MatrixXd a = x;
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.array().tanh().matrix();
      a = std::move(z);
      if (cache && l + 1 < weights_.size()) cache->activations.push_back(a);
    }
    return a;
  }

  /// Gradient of a loss with respect to every parameter, given dL/d(output).
  MlpGrad backward(const Cache& cache, const Eigen::MatrixXd& d_out) const {
    MlpGrad g;
    g.weights.resize(weights_.size());
    g.biases.resize(biases_.size());
    Eigen::MatrixXd delta = d_out;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Eigen::MatrixXd& a_in = cache.activations[l];
      g.weights[l].noalias() = delta * a_in.transpose();
      g.biases[l] = delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd back = weights_[l].transpose() * delta;
        delta = (back.array() * (1.0 - a_in.array().square())).matrix();
      }
    }
    return g;
  }

  void add_scaled(const MlpGrad& g, double f) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l] += f * g.weights[l];
      biases_[l] += f * g.biases[l];
    }
  }

  bool operator==(const Mlp& o) const {
    if (sizes_ != o.sizes_) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) return false;
    }
    return true;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
    for (std::size_t l = 0; l < net.layers(); ++l) {
      m_.weights.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
      m_.biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
    }
    v_ = m_;
  }

  std::int64_t steps() const { return t_; }

  /// Descends along `grad`.
  void step(Mlp& net, const MlpGrad& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
      param.array() -= cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    };
    for (std::size_t l = 0; l < net.layers(); ++l) {
      update(net.weights()[l], m_.weights[l], v_.weights[l], grad.weights[l]);
      update(net.biases()[l], m_.biases[l], v_.biases[l], grad.biases[l]);
    }
  }

 private:
  AdamConfig cfg_;
  MlpGrad m_, v_;
  std::int64_t t_ = 0;
};

/// Central-difference check of backprop on L = 0.5 * ||net(x) - target||^2.
/// Returns max |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|) over all parameters.
inline double grad_check(const Mlp& net, std::span<const double> x, std::span<const double> target, double eps = 1e-5) {
  if (static_cast<int>(target.size()) != net.output_size()) throw Error(ErrorCode::ShapeMismatch, "target size mismatch");
  const Eigen::Map<const Eigen::VectorXd> tgt(target.data(), static_cast<Eigen::Index>(target.size()));
  const Eigen::MatrixXd xb = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));

  Mlp::Cache cache;
  const Eigen::MatrixXd y = net.forward_batch(xb, &cache);
  const MlpGrad analytic = net.backward(cache, y.col(0) - tgt);

  const auto loss = [&](const Mlp& m) { return 0.5 * (m.forward(x) - tgt).squaredNorm(); };
  Mlp probe = net;
  double worst = 0.0;
  const auto compare = [&](double& param, double g_an) {
    const double saved = param;
    param = saved + eps;
    const double up = loss(probe);
    param = saved - eps;
    const double down = loss(probe);
    param = saved;
    const double g_fd = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(g_fd - g_an) / std::max(1e-8, std::abs(g_fd) + std::abs(g_an)));
  };
  for (std::size_t l = 0; l < probe.layers(); ++l) {
    auto& w = probe.weights()[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) compare(w(r, c), analytic.weights[l](r, c));
    auto& b = probe.biases()[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) compare(b(r), analytic.biases[l](r));
  }
  return worst;
}

// JSON: {layer_sizes, weights (row-major per layer), biases}

inline nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["layer_sizes"] = net.layer_sizes();
  auto ws = nlohmann::json::array();
  auto bs = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const auto& w = net.weights()[l];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    ws.push_back(flat);
    const auto& b = net.biases()[l];
    bs.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  j["weights"] = std::move(ws);
  j["biases"] = std::move(bs);
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    Mlp net = Mlp::zeros(j.at("layer_sizes").get<std::vector<int>>());
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (ws.size() != net.layers() || bs.size() != net.layers()) throw Error(ErrorCode::ShapeMismatch, "checkpoint layer count mismatch");
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const auto flat = ws[l].get<std::vector<double>>();
      const auto bias = bs[l].get<std::vector<double>>();
      auto& w = net.weights()[l];
      auto& b = net.biases()[l];
      if (flat.size() != static_cast<std::size_t>(w.size()) || bias.size() != static_cast<std::size_t>(b.size())) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint layer " + std::to_string(l) + " has the wrong number of values");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = bias[static_cast<std::size_t>(r)];
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ShapeMismatch, std::string("malformed network JSON: ") + e.what());
  }
}

}  // namespace dccfr
