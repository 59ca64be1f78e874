#pragma once

// Small fully connected noise-prediction network eps_theta(x, t [, y]) with
// hand-implemented reverse-mode differentiation. The time input is embedded
// as t/T plus a fixed bank of sinusoidal features; class labels, when the
// net is conditional, are appended one-hot.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/rng.hpp"

namespace cdlab {

struct ScoreNetConfig {
  int dim = 2;
  std::vector<int> hidden = {128, 128, 128};
  int time_freqs = 8;   // sinusoidal features, sin/cos pairs at doubling frequencies
  int num_classes = 0;  // 0 = unconditional

  int input_dim() const { return dim + 1 + time_freqs + num_classes; }
};

struct ScoreNetGrads {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
};

struct ScoreNet {
  ScoreNetConfig cfg;
  std::vector<Eigen::MatrixXd> W;  // W[l] maps layer input -> output (rows = out)
  std::vector<Eigen::VectorXd> b;

  static ScoreNet create(const ScoreNetConfig& cfg, std::uint64_t seed) {
    require(cfg.dim >= 1, "ScoreNet: dim >= 1 required");
    require(cfg.time_freqs >= 0 && cfg.time_freqs % 2 == 0,
            "ScoreNet: time_freqs must be even and nonnegative");
    ScoreNet net;
    net.cfg = cfg;
    Rng rng(seed);
    std::vector<int> sizes;
    sizes.push_back(cfg.input_dim());
    for (int h : cfg.hidden) {
      require(h >= 1, "ScoreNet: hidden sizes must be positive");
      sizes.push_back(h);
    }
    sizes.push_back(cfg.dim);
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int fan_in = sizes[l], fan_out = sizes[l + 1];
      const double scale = std::sqrt(1.0 / fan_in);
      Eigen::MatrixXd w(fan_out, fan_in);
      for (int i = 0; i < fan_out; ++i)
        for (int j = 0; j < fan_in; ++j) w(i, j) = scale * rng.normal();
      net.W.push_back(std::move(w));
      net.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
  }

  size_t layer_count() const { return W.size(); }

  long param_count() const {
    long n = 0;
    for (size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
  }

  Eigen::VectorXd flatten_params() const {
    Eigen::VectorXd flat(param_count());
    long off = 0;
    for (size_t l = 0; l < W.size(); ++l) {
      for (Eigen::Index i = 0; i < W[l].rows(); ++i)
        for (Eigen::Index j = 0; j < W[l].cols(); ++j) flat[off++] = W[l](i, j);
      for (Eigen::Index i = 0; i < b[l].size(); ++i) flat[off++] = b[l][i];
    }
    return flat;
  }

  void load_params(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    require(flat.size() == param_count(), "ScoreNet: parameter count mismatch");
    long off = 0;
    for (size_t l = 0; l < W.size(); ++l) {
      for (Eigen::Index i = 0; i < W[l].rows(); ++i)
        for (Eigen::Index j = 0; j < W[l].cols(); ++j) W[l](i, j) = flat[off++];
      for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = flat[off++];
    }
  }

  // Rows: [x, t/T, sin/cos bank, one-hot class].
  Eigen::MatrixXd build_input(const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& t_over_T,
                              const Eigen::VectorXi* labels) const {
    const Eigen::Index batch = x.rows();
    require(x.cols() == cfg.dim, "ScoreNet: input dimension mismatch");
    require(t_over_T.size() == batch, "ScoreNet: time vector size mismatch");
    if (cfg.num_classes > 0)
      require(labels != nullptr && labels->size() == batch,
              "ScoreNet: conditional net requires labels");
    Eigen::MatrixXd in = Eigen::MatrixXd::Zero(batch, cfg.input_dim());
    in.leftCols(cfg.dim) = x;
    in.col(cfg.dim) = t_over_T;
    for (Eigen::Index i = 0; i < batch; ++i) {
      for (int k = 0; k < cfg.time_freqs / 2; ++k) {
        const double w = std::pow(2.0, k) * std::numbers::pi * t_over_T[i];
        in(i, cfg.dim + 1 + 2 * k) = std::sin(w);
        in(i, cfg.dim + 1 + 2 * k + 1) = std::cos(w);
      }
      if (cfg.num_classes > 0) {
        const int y = (*labels)[i];
        require(y >= 0 && y < cfg.num_classes, "ScoreNet: label out of range");
        in(i, cfg.dim + 1 + cfg.time_freqs + y) = 1.0;
      }
    }
    return in;
  }

  struct Cache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> hidden_act;  // tanh outputs per hidden layer
  };

  Eigen::MatrixXd forward_cached(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& t_over_T,
                                 const Eigen::VectorXi* labels, Cache& cache) const {
    cache.input = build_input(x, t_over_T, labels);
    cache.hidden_act.clear();
    Eigen::MatrixXd a = cache.input;
    for (size_t l = 0; l + 1 < W.size(); ++l) {
      Eigen::MatrixXd z = a * W[l].transpose();
      z.rowwise() += b[l].transpose();
      a = z.array().tanh().matrix();
      cache.hidden_act.push_back(a);
    }
    Eigen::MatrixXd out = a * W.back().transpose();
    out.rowwise() += b.back().transpose();
    return out;
  }

  Eigen::MatrixXd forward(const Eigen::Ref<const Eigen::MatrixXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& t_over_T,
                          const Eigen::VectorXi* labels = nullptr) const {
    Cache cache;
    return forward_cached(x, t_over_T, labels, cache);
  }

  // Single-sample convenience.
  Eigen::VectorXd forward_one(const Eigen::Ref<const Eigen::VectorXd>& x, double t_over_T,
                              int label = -1) const {
    Eigen::MatrixXd xm = x.transpose();
    Eigen::VectorXd tv = Eigen::VectorXd::Constant(1, t_over_T);
    if (cfg.num_classes > 0) {
      Eigen::VectorXi lv(1);
      lv[0] = label;
      return forward(xm, tv, &lv).row(0);
    }
    return forward(xm, tv, nullptr).row(0);
  }

  // Reverse-mode parameter gradients given d(loss)/d(output).
  ScoreNetGrads backward(const Cache& cache, const Eigen::Ref<const Eigen::MatrixXd>& dout) const {
    ScoreNetGrads g;
    g.W.resize(W.size());
    g.b.resize(W.size());
    const size_t L = W.size();
    Eigen::MatrixXd delta = dout;  // gradient w.r.t. pre-activation of the layer being processed
    for (size_t l = L; l-- > 0;) {
      const Eigen::MatrixXd& a_in = (l == 0) ? cache.input : cache.hidden_act[l - 1];
      g.W[l] = delta.transpose() * a_in;
      g.b[l] = delta.colwise().sum();
      if (l > 0) {
        Eigen::MatrixXd da = delta * W[l];
        const Eigen::MatrixXd& h = cache.hidden_act[l - 1];
        delta = (da.array() * (1.0 - h.array().square())).matrix();
      }
    }
    return g;
  }
};

}  // namespace cdlab
