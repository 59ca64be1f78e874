#pragma once

// DDPM training on the simplified noise-prediction objective plus DDPM
// ancestral sampling and DDIM subsequence sampling. The DDIM stepping core
// accepts an optional per-step hook that can replace the predicted noise;
// the guided sampler is built on that hook so its lambda=0 case is bitwise
// identical to plain DDIM.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/rng.hpp"
#include "cdlab/schedule.hpp"
#include "cdlab/score_net.hpp"

namespace cdlab {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
inline Eigen::VectorXd forward_noise(const Eigen::Ref<const Eigen::VectorXd>& x0, int t,
                                     const Eigen::Ref<const Eigen::VectorXd>& noise,
                                     const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.T, "forward_noise: t out of range");
  require(x0.size() == noise.size(), "forward_noise: dimension mismatch");
  const double ab = sched.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

struct DenoiseLossResult {
  double loss = 0.0;
  ScoreNetGrads grads;
};

// Batch mean of ||eps - eps_theta(x_t, t)||^2 with t uniform on {1..T} and
// eps standard normal, both drawn per sample from rng (t first, then the
// noise coordinates). Gradients via the net's reverse mode.
inline DenoiseLossResult denoise_loss_and_grads(const ScoreNet& net,
                                                const Eigen::Ref<const Eigen::MatrixXd>& batch,
                                                const Eigen::VectorXi* labels,
                                                const NoiseSchedule& sched, Rng& rng) {
  const Eigen::Index B = batch.rows();
  const Eigen::Index d = batch.cols();
  require(B >= 1, "denoise_loss_and_grads: empty batch");
  require(d == net.cfg.dim, "denoise_loss_and_grads: dimension mismatch");
  Eigen::MatrixXd xt(B, d);
  Eigen::MatrixXd eps(B, d);
  Eigen::VectorXd tau(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const int t = static_cast<int>(rng.below(sched.T)) + 1;
    tau[i] = double(t) / sched.T;
    const double ab = sched.alpha_bar_at(t);
    const double c0 = std::sqrt(ab), c1 = std::sqrt(1.0 - ab);
    for (Eigen::Index j = 0; j < d; ++j) {
      eps(i, j) = rng.normal();
      xt(i, j) = c0 * batch(i, j) + c1 * eps(i, j);
    }
  }
  ScoreNet::Cache cache;
  const Eigen::MatrixXd out = net.forward_cached(xt, tau, labels, cache);
  const Eigen::MatrixXd resid = out - eps;
  DenoiseLossResult r;
  r.loss = resid.squaredNorm() / double(B);
  r.grads = net.backward(cache, (2.0 / double(B)) * resid);
  return r;
}

enum class OptimizerKind { kGradientDescent, kMomentum };

struct TrainOpts {
  long iters = 10000;
  int batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kMomentum;
  double momentum = 0.9;  // momentum update: v <- momentum*v + g; p <- p - lr*v

  void validate() const {
    require(iters >= 1 && batch >= 1, "TrainOpts: iters and batch must be positive");
    require(lr > 0.0, "TrainOpts: lr > 0 required");
    require(momentum >= 0.0 && momentum < 1.0, "TrainOpts: momentum in [0,1) required");
  }
};

struct TrainResult {
  ScoreNet net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Minibatch indices are drawn with replacement; each iteration consumes the
// index draws first, then the per-sample (t, eps) draws, all from one stream
// derived from opts.seed. Net initialization uses its own derived stream.
inline TrainResult train_score_net(const Eigen::Ref<const Eigen::MatrixXd>& data,
                                   const Eigen::VectorXi* labels, const NoiseSchedule& sched,
                                   const ScoreNetConfig& net_cfg, const TrainOpts& opts) {
  opts.validate();
  const Eigen::Index N = data.rows();
  require(N >= 1, "train_score_net: empty data");
  require(data.cols() == net_cfg.dim, "train_score_net: dimension mismatch");
  if (net_cfg.num_classes > 0)
    require(labels != nullptr && labels->size() == N, "train_score_net: labels required");

  TrainResult res;
  res.net = ScoreNet::create(net_cfg, derive_seed(opts.seed, 1));
  Rng rng(derive_seed(opts.seed, 2));

  std::vector<Eigen::MatrixXd> vW;
  std::vector<Eigen::VectorXd> vb;
  if (opts.optimizer == OptimizerKind::kMomentum) {
    for (size_t l = 0; l < res.net.W.size(); ++l) {
      vW.push_back(Eigen::MatrixXd::Zero(res.net.W[l].rows(), res.net.W[l].cols()));
      vb.push_back(Eigen::VectorXd::Zero(res.net.b[l].size()));
    }
  }

  Eigen::MatrixXd mb(opts.batch, data.cols());
  Eigen::VectorXi mb_labels(opts.batch);
  for (long it = 0; it < opts.iters; ++it) {
    for (int i = 0; i < opts.batch; ++i) {
      const Eigen::Index idx = static_cast<Eigen::Index>(rng.below(N));
      mb.row(i) = data.row(idx);
      if (labels) mb_labels[i] = (*labels)[idx];
    }
    const Eigen::VectorXi* mbl = (net_cfg.num_classes > 0) ? &mb_labels : nullptr;
    DenoiseLossResult step = denoise_loss_and_grads(res.net, mb, mbl, sched, rng);
    if (!std::isfinite(step.loss)) throw training_diverged_error(it);
    if (it == 0) res.initial_loss = step.loss;
    res.final_loss = step.loss;
    for (size_t l = 0; l < res.net.W.size(); ++l) {
      if (opts.optimizer == OptimizerKind::kMomentum) {
        vW[l] = opts.momentum * vW[l] + step.grads.W[l];
        vb[l] = opts.momentum * vb[l] + step.grads.b[l];
        res.net.W[l] -= opts.lr * vW[l];
        res.net.b[l] -= opts.lr * vb[l];
      } else {
        res.net.W[l] -= opts.lr * step.grads.W[l];
        res.net.b[l] -= opts.lr * step.grads.b[l];
      }
    }
  }
  return res;
}

// Chain i draws from an independent stream derived as (seed, i): first the d
// initial coordinates, then any per-step noise. This keeps outputs invariant
// to how chains would be scheduled in parallel.
inline std::vector<Rng> make_chain_rngs(std::uint64_t seed, int m) {
  std::vector<Rng> rngs;
  rngs.reserve(m);
  for (int i = 0; i < m; ++i) rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(i)));
  return rngs;
}

inline Eigen::MatrixXd sample_initial_state(std::vector<Rng>& chains, Eigen::Index d,
                                            double init_scale) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(chains.size()), d);
  for (size_t i = 0; i < chains.size(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = init_scale * chains[i].normal();
  return x;
}

// Ancestral DDPM sampler, x_{t-1} = (x_t - (1-alpha_t)/sqrt(1-abar_t) eps_hat)
// / sqrt(alpha_t) + sigma_t z, with sigma_t = sqrt(1-alpha_t) and z = 0 at the
// final step t=1.
inline Eigen::MatrixXd ddpm_sample(const ScoreNet& net, const NoiseSchedule& sched, int m,
                                   std::uint64_t seed, double init_scale = 1.0,
                                   const Eigen::VectorXi* labels = nullptr) {
  require(m >= 1, "ddpm_sample: m >= 1 required");
  require(init_scale > 0.0, "ddpm_sample: init_scale > 0 required");
  const Eigen::Index d = net.cfg.dim;
  std::vector<Rng> chains = make_chain_rngs(seed, m);
  Eigen::MatrixXd x = sample_initial_state(chains, d, init_scale);
  for (int t = sched.T; t >= 1; --t) {
    const Eigen::VectorXd tau = Eigen::VectorXd::Constant(m, double(t) / sched.T);
    const Eigen::MatrixXd eps_hat = net.forward(x, tau, labels);
    const double a = sched.alpha_at(t);
    const double ab = sched.alpha_bar_at(t);
    const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
    const double sigma = std::sqrt(1.0 - a);
    x = (x - coef * eps_hat) / std::sqrt(a);
    if (t > 1)
      for (int i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) += sigma * chains[i].normal();
  }
  return x;
}

namespace detail {

// Per-step replacement for the predicted noise. Receives the step index t,
// the frozen batch x_t, the batch at the previous (higher-t) iterate, and
// eps_hat; returns the direction actually used in the DDIM update.
using StepHook = std::function<Eigen::MatrixXd(int t, const Eigen::MatrixXd& x,
                                               const Eigen::MatrixXd& prev,
                                               const Eigen::MatrixXd& eps_hat)>;

inline Eigen::MatrixXd ddim_core(const ScoreNet& net, const NoiseSchedule& sched,
                                 const std::vector<int>& subseq, double eta, int m,
                                 std::uint64_t seed, double init_scale,
                                 const Eigen::VectorXi* labels, const StepHook& hook) {
  require(m >= 1, "ddim_sample: m >= 1 required");
  require(eta >= 0.0 && eta <= 1.0, "ddim_sample: eta in [0,1] required");
  require(init_scale > 0.0, "ddim_sample: init_scale > 0 required");
  validate_subsequence(subseq, sched.T);
  const Eigen::Index d = net.cfg.dim;
  std::vector<Rng> chains = make_chain_rngs(seed, m);
  Eigen::MatrixXd x = sample_initial_state(chains, d, init_scale);
  Eigen::MatrixXd prev = x;
  for (size_t k = subseq.size(); k-- > 0;) {
    const int t = subseq[k];
    const int t_next = (k > 0) ? subseq[k - 1] : 0;
    const Eigen::VectorXd tau = Eigen::VectorXd::Constant(m, double(t) / sched.T);
    const Eigen::MatrixXd eps_hat = net.forward(x, tau, labels);
    const Eigen::MatrixXd delta = hook ? hook(t, x, prev, eps_hat) : eps_hat;
    const double ab_t = sched.alpha_bar_at(t);
    const double ab_n = sched.alpha_bar_at(t_next);
    double sigma = 0.0;
    if (eta > 0.0 && t_next >= 1)
      sigma = eta * std::sqrt((1.0 - ab_n) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_n);
    const double dir_coef = std::sqrt(std::max(0.0, 1.0 - ab_n - sigma * sigma));
    prev = x;
    x = std::sqrt(ab_n) * (x - std::sqrt(1.0 - ab_t) * delta) / std::sqrt(ab_t) + dir_coef * delta;
    if (sigma > 0.0)
      for (int i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) += sigma * chains[i].normal();
    if (hook) {
      for (int i = 0; i < m; ++i)
        if (!x.row(i).allFinite()) throw guidance_diverged_error(t, i);
    }
  }
  return x;
}

}  // namespace detail

inline Eigen::MatrixXd ddim_sample(const ScoreNet& net, const NoiseSchedule& sched,
                                   const std::vector<int>& subseq, double eta, int m,
                                   std::uint64_t seed, double init_scale = 1.0,
                                   const Eigen::VectorXi* labels = nullptr) {
  return detail::ddim_core(net, sched, subseq, eta, m, seed, init_scale, labels, nullptr);
}

}  // namespace cdlab
