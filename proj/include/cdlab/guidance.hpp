#pragma once

// Contrastive losses (InfoNCE and hard-negative-mining), positive/negative
// pair selection strategies, the contrastive-guided sampler built on the DDIM
// stepping core, and an SVGD update provided as a comparison baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/diffusion.hpp"
#include "cdlab/rng.hpp"

namespace cdlab {

// Either the identity map or a fixed 2-layer feedforward embedding
// f(x) = W2 tanh(W1 x + b1) + b2, with exact vector-Jacobian products for
// chaining loss gradients back to input coordinates.
struct FeatureExtractor {
  enum class Kind { kIdentity, kTrainableEmbedding };

  Kind kind = Kind::kIdentity;
  Eigen::MatrixXd W1, W2;
  Eigen::VectorXd b1, b2;

  static FeatureExtractor identity() { return FeatureExtractor{}; }

  static FeatureExtractor embedding(int in_dim, int hidden, int out_dim, std::uint64_t seed) {
    require(in_dim >= 1 && hidden >= 1 && out_dim >= 1, "FeatureExtractor: positive sizes");
    FeatureExtractor f;
    f.kind = Kind::kTrainableEmbedding;
    Rng rng(seed);
    f.W1 = std::sqrt(1.0 / in_dim) * rng.normal_matrix(hidden, in_dim);
    f.b1 = Eigen::VectorXd::Zero(hidden);
    f.W2 = std::sqrt(1.0 / hidden) * rng.normal_matrix(out_dim, hidden);
    f.b2 = Eigen::VectorXd::Zero(out_dim);
    return f;
  }

  Eigen::Index out_dim(Eigen::Index in_dim) const {
    return kind == Kind::kIdentity ? in_dim : W2.rows();
  }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (kind == Kind::kIdentity) return x;
    const Eigen::VectorXd h = (W1 * x + b1).array().tanh();
    return W2 * h + b2;
  }

  // v' * df/dx for the given input.
  Eigen::VectorXd input_vjp(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (kind == Kind::kIdentity) return v;
    const Eigen::VectorXd h = (W1 * x + b1).array().tanh();
    const Eigen::VectorXd dh = (W2.transpose() * v).cwiseProduct(
        (1.0 - h.array().square()).matrix());
    return W1.transpose() * dh;
  }
};

enum class ContrastiveLoss { kInfoNce, kHnm, kConditionalInfoNce, kConditionalHnm };
enum class PairStrategy { kVanilla, kRealPositive, kRealNegative, kClassConditional };

inline bool loss_is_hnm(ContrastiveLoss k) {
  return k == ContrastiveLoss::kHnm || k == ContrastiveLoss::kConditionalHnm;
}
inline bool loss_is_conditional(ContrastiveLoss k) {
  return k == ContrastiveLoss::kConditionalInfoNce || k == ContrastiveLoss::kConditionalHnm;
}

struct GuidanceConfig {
  ContrastiveLoss loss = ContrastiveLoss::kInfoNce;
  double tau = 10.0;
  double tau_plus = 0.1;  // tau_minus = 1 - tau_plus
  double beta = 1.0;
  double lambda = 0.0;
  PairStrategy pair_strategy = PairStrategy::kVanilla;
  FeatureExtractor extractor;
  double eta = 0.0;
  bool normalize_features = true;

  void validate() const {
    require(tau > 0.0, "GuidanceConfig: tau > 0 required");
    require(tau_plus >= 0.0 && tau_plus < 1.0, "GuidanceConfig: tau_plus in [0,1) required");
    require(beta >= 0.0, "GuidanceConfig: beta >= 0 required");
    require(lambda >= 0.0, "GuidanceConfig: lambda >= 0 required");
    require(eta >= 0.0 && eta <= 1.0, "GuidanceConfig: eta in [0,1] required");
  }
};

// l = -log( g(a,p) / sum_{k != anchor} g(a, batch_k) ), g(x,x') = exp(x'x'/tau),
// evaluated on feature vectors. Stable via logsumexp.
inline double info_nce(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                       const Eigen::Ref<const Eigen::VectorXd>& positive,
                       const Eigen::Ref<const Eigen::MatrixXd>& batch, Eigen::Index anchor_index,
                       double tau) {
  const Eigen::Index m = batch.rows();
  require(m >= 2, "info_nce: batch size >= 2 required (no negatives)");
  require(anchor_index >= 0 && anchor_index < m, "info_nce: anchor index out of range");
  require(tau > 0.0, "info_nce: tau > 0 required");
  double max_s = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m; ++k) {
    if (k == anchor_index) continue;
    max_s = std::max(max_s, anchor.dot(batch.row(k)) / tau);
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (k == anchor_index) continue;
    sum += std::exp(anchor.dot(batch.row(k)) / tau - max_s);
  }
  const double lse = max_s + std::log(sum);
  return lse - anchor.dot(positive) / tau;
}

namespace detail {

// Self-normalized importance weights proportional to exp(beta * a'n_j).
inline Eigen::VectorXd vmf_weights(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                                   const Eigen::Ref<const Eigen::MatrixXd>& negatives,
                                   double beta) {
  const Eigen::Index k = negatives.rows();
  Eigen::VectorXd s(k);
  for (Eigen::Index j = 0; j < k; ++j) s[j] = beta * anchor.dot(negatives.row(j));
  const double mx = s.maxCoeff();
  Eigen::VectorXd w = (s.array() - mx).exp();
  return w / w.sum();
}

struct HnmParts {
  double g_p = 0.0;
  double h = 0.0;
  bool clamped = false;
  Eigen::VectorXd weights;  // importance weights over negatives
};

inline HnmParts hnm_parts(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                          const Eigen::Ref<const Eigen::VectorXd>& positive,
                          const Eigen::Ref<const Eigen::MatrixXd>& negatives, double tau,
                          double tau_plus, double beta) {
  HnmParts p;
  p.g_p = std::exp(anchor.dot(positive) / tau);
  p.weights = vmf_weights(anchor, negatives, beta);
  double e_neg = 0.0;
  for (Eigen::Index j = 0; j < negatives.rows(); ++j)
    e_neg += p.weights[j] * std::exp(anchor.dot(negatives.row(j)) / tau);
  // single-positive estimate of the debias expectation
  const double e_pos = p.g_p;
  const double floor = std::exp(-1.0 / tau);
  p.h = e_neg - tau_plus * e_pos;
  if (p.h < floor) {
    p.h = floor;
    p.clamped = true;
  }
  return p;
}

}  // namespace detail

// Hard-negative-mining loss: l = -log g_p / (g_p + (m / tau_minus) h), with
// h = E_{q_beta}[g over negatives] - tau_plus * E[g over positives], both
// expectations estimated by self-normalized importance weighting, and h
// floored at e^{-1/tau}.
inline double hnm_loss(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                       const Eigen::Ref<const Eigen::VectorXd>& positive,
                       const Eigen::Ref<const Eigen::MatrixXd>& negatives, double tau,
                       double tau_plus, double beta, int m) {
  require(negatives.rows() >= 1, "hnm_loss: at least one negative required");
  require(tau > 0.0, "hnm_loss: tau > 0 required");
  require(tau_plus >= 0.0 && tau_plus < 1.0, "hnm_loss: tau_plus in [0,1) required");
  require(beta >= 0.0, "hnm_loss: beta >= 0 required");
  require(m >= 1, "hnm_loss: m >= 1 required");
  const auto p = detail::hnm_parts(anchor, positive, negatives, tau, tau_plus, beta);
  const double tau_minus = 1.0 - tau_plus;
  const double denom = p.g_p + (double(m) / tau_minus) * p.h;
  return -std::log(p.g_p / denom);
}

struct PairSelection {
  Eigen::VectorXd positive;
  Eigen::MatrixXd negatives;  // one negative per row, raw points
};

// Strategy semantics (anchor = chain `anchor_index` of the lockstep batch):
//   vanilla           positive = this chain's previous iterate, negatives = other chains
//   real-positive     positive = random real sample, negatives = other chains
//   real-negative     positive = random other chain, negatives = random real samples
//   class-conditional positive = previous iterate, negatives = chains with a different label
inline PairSelection select_pairs(PairStrategy strategy,
                                  const Eigen::Ref<const Eigen::MatrixXd>& batch,
                                  const Eigen::Ref<const Eigen::MatrixXd>& prev,
                                  const Eigen::MatrixXd* real_data, const Eigen::VectorXi* labels,
                                  Eigen::Index anchor_index, Rng& rng) {
  const Eigen::Index m = batch.rows();
  const Eigen::Index d = batch.cols();
  require(m >= 2, "select_pairs: batch size >= 2 required");
  require(anchor_index >= 0 && anchor_index < m, "select_pairs: anchor index out of range");
  require(prev.rows() == m && prev.cols() == d, "select_pairs: prev/batch shape mismatch");

  PairSelection sel;
  const auto others = [&](const Eigen::Ref<const Eigen::MatrixXd>& src) {
    Eigen::MatrixXd out(m - 1, d);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      if (i != anchor_index) out.row(r++) = src.row(i);
    return out;
  };

  switch (strategy) {
    case PairStrategy::kVanilla:
      sel.positive = prev.row(anchor_index);
      sel.negatives = others(batch);
      break;
    case PairStrategy::kRealPositive: {
      require(real_data != nullptr && real_data->rows() >= 1,
              "select_pairs: real data required for real-positive strategy");
      sel.positive = real_data->row(static_cast<Eigen::Index>(rng.below(real_data->rows())));
      sel.negatives = others(batch);
      break;
    }
    case PairStrategy::kRealNegative: {
      require(real_data != nullptr && real_data->rows() >= 1,
              "select_pairs: real data required for real-negative strategy");
      Eigen::Index pick = static_cast<Eigen::Index>(rng.below(m - 1));
      if (pick >= anchor_index) ++pick;
      sel.positive = batch.row(pick);
      sel.negatives.resize(m - 1, d);
      for (Eigen::Index i = 0; i < m - 1; ++i)
        sel.negatives.row(i) = real_data->row(static_cast<Eigen::Index>(rng.below(real_data->rows())));
      break;
    }
    case PairStrategy::kClassConditional: {
      require(labels != nullptr && labels->size() == m,
              "select_pairs: labels required for class-conditional strategy");
      sel.positive = prev.row(anchor_index);
      Eigen::Index count = 0;
      for (Eigen::Index i = 0; i < m; ++i)
        if (i != anchor_index && (*labels)[i] != (*labels)[anchor_index]) ++count;
      if (count == 0)
        throw empty_negative_set_error(
            "class-conditional pairing: no batch member with a different class label");
      sel.negatives.resize(count, d);
      Eigen::Index r = 0;
      for (Eigen::Index i = 0; i < m; ++i)
        if (i != anchor_index && (*labels)[i] != (*labels)[anchor_index])
          sel.negatives.row(r++) = batch.row(i);
      break;
    }
  }
  return sel;
}

namespace detail {

struct FeaturizedPairs {
  Eigen::VectorXd u_raw, u;    // anchor features, pre/post normalization
  Eigen::VectorXd p;           // positive features
  Eigen::MatrixXd n;           // negative features, one per row
};

inline Eigen::VectorXd maybe_normalize(const Eigen::VectorXd& v, bool normalize) {
  if (!normalize) return v;
  const double norm = v.norm();
  require(norm > 0.0, "guidance: cannot unit-normalize a zero feature vector");
  return v / norm;
}

inline FeaturizedPairs featurize(const GuidanceConfig& cfg,
                                 const Eigen::Ref<const Eigen::VectorXd>& anchor,
                                 const PairSelection& sel) {
  FeaturizedPairs fp;
  fp.u_raw = cfg.extractor.apply(anchor);
  fp.u = maybe_normalize(fp.u_raw, cfg.normalize_features);
  fp.p = maybe_normalize(cfg.extractor.apply(sel.positive), cfg.normalize_features);
  const Eigen::Index k = sel.negatives.rows();
  fp.n.resize(k, fp.u.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd nf = maybe_normalize(cfg.extractor.apply(sel.negatives.row(j)),
                                         cfg.normalize_features);
    fp.n.row(j) = nf;
  }
  return fp;
}

// d(loss)/d(anchor feature u), positives/negatives constant.
inline Eigen::VectorXd loss_grad_wrt_features(const GuidanceConfig& cfg,
                                              const FeaturizedPairs& fp, int m_scale) {
  const Eigen::Index k = fp.n.rows();
  if (!loss_is_hnm(cfg.loss)) {
    Eigen::VectorXd s(k);
    for (Eigen::Index j = 0; j < k; ++j) s[j] = fp.u.dot(fp.n.row(j)) / cfg.tau;
    const double mx = s.maxCoeff();
    Eigen::VectorXd soft = (s.array() - mx).exp();
    soft /= soft.sum();
    Eigen::VectorXd g = -fp.p / cfg.tau;
    for (Eigen::Index j = 0; j < k; ++j) g += (soft[j] / cfg.tau) * fp.n.row(j).transpose();
    return g;
  }
  const auto parts = hnm_parts(fp.u, fp.p, fp.n, cfg.tau, cfg.tau_plus, cfg.beta);
  const double tau_minus = 1.0 - cfg.tau_plus;
  const double scale = double(m_scale) / tau_minus;
  const double denom = parts.g_p + scale * parts.h;
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(fp.u.size());
  if (!parts.clamped) {
    Eigen::VectorXd nbar = Eigen::VectorXd::Zero(fp.u.size());
    for (Eigen::Index j = 0; j < k; ++j) nbar += parts.weights[j] * fp.n.row(j).transpose();
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e_j = std::exp(fp.u.dot(fp.n.row(j)) / cfg.tau);
      dh += parts.weights[j] * e_j *
            (cfg.beta * (fp.n.row(j).transpose() - nbar) + fp.n.row(j).transpose() / cfg.tau);
    }
    dh -= (cfg.tau_plus * parts.g_p / cfg.tau) * fp.p;
  }
  // l = -u'p/tau + log(g_p + scale*h)
  return -fp.p / cfg.tau + (parts.g_p * fp.p / cfg.tau + scale * dh) / denom;
}

}  // namespace detail

// Scalar loss as a function of the anchor input point (used by the sampler's
// gradient and by finite-difference tests).
inline double contrastive_loss(const GuidanceConfig& cfg,
                               const Eigen::Ref<const Eigen::VectorXd>& anchor,
                               const PairSelection& sel, int m_scale) {
  cfg.validate();
  require(sel.negatives.rows() >= 1, "contrastive_loss: at least one negative required");
  const auto fp = detail::featurize(cfg, anchor, sel);
  if (!loss_is_hnm(cfg.loss)) {
    // denominator batch: anchor at row 0, negatives after
    Eigen::MatrixXd denom(fp.n.rows() + 1, fp.u.size());
    denom.row(0) = fp.u;
    denom.bottomRows(fp.n.rows()) = fp.n;
    return info_nce(fp.u, fp.p, denom, 0, cfg.tau);
  }
  return hnm_loss(fp.u, fp.p, fp.n, cfg.tau, cfg.tau_plus, cfg.beta, m_scale);
}

// Exact gradient of the selected loss with respect to the anchor's input
// coordinates, chained through feature normalization and the extractor.
inline Eigen::VectorXd contrastive_grad(const GuidanceConfig& cfg,
                                        const Eigen::Ref<const Eigen::VectorXd>& anchor,
                                        const PairSelection& sel, int m_scale) {
  cfg.validate();
  require(sel.negatives.rows() >= 1, "contrastive_grad: at least one negative required");
  const auto fp = detail::featurize(cfg, anchor, sel);
  Eigen::VectorXd g = detail::loss_grad_wrt_features(cfg, fp, m_scale);
  if (cfg.normalize_features) {
    // u = u_raw/||u_raw||; VJP is (I - u u')/||u_raw||
    const double norm = fp.u_raw.norm();
    g = (g - fp.u * fp.u.dot(g)) / norm;
  }
  return cfg.extractor.input_vjp(anchor, g);
}

// Algorithm: run the whole batch in lockstep along the reversed subsequence;
// per step compute every chain's Delta = lambda * grad l_contra + eps_theta
// from the frozen batch, then update all chains simultaneously. Pair
// selection draws come from a stream separate from the chains' noise streams,
// so lambda = 0 reproduces ddim_sample bitwise.
inline Eigen::MatrixXd contrastive_dp_sample(const ScoreNet& net, const NoiseSchedule& sched,
                                             const std::vector<int>& subseq,
                                             const GuidanceConfig& cfg, int m,
                                             const Eigen::MatrixXd* real_data,
                                             const Eigen::VectorXi* labels, std::uint64_t seed,
                                             double init_scale = 1.0) {
  cfg.validate();
  require(m >= 2, "contrastive_dp_sample: m >= 2 required");
  if (loss_is_conditional(cfg.loss) || cfg.pair_strategy == PairStrategy::kClassConditional)
    require(labels != nullptr, "contrastive_dp_sample: labels required for conditional guidance");
  Rng pair_rng(derive_seed(seed, 0x70616972ULL));  // independent of chain noise streams
  detail::StepHook hook = [&](int /*t*/, const Eigen::MatrixXd& x, const Eigen::MatrixXd& prev,
                              const Eigen::MatrixXd& eps_hat) -> Eigen::MatrixXd {
    if (cfg.lambda == 0.0) return eps_hat;
    Eigen::MatrixXd delta = eps_hat;
    for (int i = 0; i < m; ++i) {
      PairSelection sel =
          select_pairs(cfg.pair_strategy, x, prev, real_data, labels, i, pair_rng);
      delta.row(i) += cfg.lambda * contrastive_grad(cfg, x.row(i), sel, m).transpose();
    }
    return delta;
  };
  const Eigen::VectorXi* net_labels = (net.cfg.num_classes > 0) ? labels : nullptr;
  return detail::ddim_core(net, sched, subseq, cfg.eta, m, seed, init_scale, net_labels, hook);
}

// Picks lambda so that the mean guidance-gradient norm is `ratio` times the
// mean predicted-noise norm, probed at t = T/2 on noised copies of real data.
inline double calibrate_lambda(const ScoreNet& net, const NoiseSchedule& sched,
                               const GuidanceConfig& cfg, int m,
                               const Eigen::MatrixXd& real_data, const Eigen::VectorXi* labels,
                               std::uint64_t seed, double ratio = 0.5) {
  require(m >= 2, "calibrate_lambda: m >= 2 required");
  require(ratio > 0.0, "calibrate_lambda: ratio > 0 required");
  require(real_data.rows() >= 1, "calibrate_lambda: real data required");
  const int t_mid = std::max(1, sched.T / 2);
  const Eigen::Index d = net.cfg.dim;
  Rng rng(derive_seed(seed, 0x6c616dULL));
  Eigen::MatrixXd x(m, d), prev(m, d);
  Eigen::VectorXi batch_labels(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::Index idx = static_cast<Eigen::Index>(rng.below(real_data.rows()));
    batch_labels[i] = labels ? (*labels)[idx] : 0;
    x.row(i) = forward_noise(real_data.row(idx), t_mid, rng.normal_vector(d), sched);
    prev.row(i) = forward_noise(real_data.row(idx), t_mid, rng.normal_vector(d), sched);
  }
  const Eigen::VectorXd tau = Eigen::VectorXd::Constant(m, double(t_mid) / sched.T);
  const Eigen::VectorXi* net_labels = (net.cfg.num_classes > 0) ? &batch_labels : nullptr;
  const Eigen::MatrixXd eps_hat = net.forward(x, tau, net_labels);
  const Eigen::VectorXi* pair_labels =
      (cfg.pair_strategy == PairStrategy::kClassConditional || loss_is_conditional(cfg.loss))
          ? &batch_labels
          : nullptr;
  double eps_norm = 0.0, grad_norm = 0.0;
  for (int i = 0; i < m; ++i) {
    eps_norm += eps_hat.row(i).norm();
    PairSelection sel =
        select_pairs(cfg.pair_strategy, x, prev, &real_data, pair_labels, i, rng);
    grad_norm += contrastive_grad(cfg, x.row(i), sel, m).norm();
  }
  require(grad_norm > 0.0, "calibrate_lambda: guidance gradient vanished at the probe point");
  return ratio * eps_norm / grad_norm;
}

// One SVGD step with Gaussian kernel k(x,x') = exp(-||x-x'||^2 / (2h^2)):
// Delta_i = (1/n) sum_j [ s_j k(x_j,x_i) + k(x_j,x_i)(x_i-x_j)/h^2 ].
inline Eigen::MatrixXd svgd_update(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                                   const Eigen::Ref<const Eigen::MatrixXd>& scores,
                                   double bandwidth, double step) {
  const Eigen::Index n = particles.rows();
  require(n >= 1, "svgd_update: at least one particle required");
  require(scores.rows() == n && scores.cols() == particles.cols(),
          "svgd_update: score/particle shape mismatch");
  require(bandwidth > 0.0 && step > 0.0, "svgd_update: bandwidth and step must be positive");
  const double h2 = bandwidth * bandwidth;
  Eigen::MatrixXd out = particles;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(particles.cols());
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd diff = particles.row(i) - particles.row(j);
      const double k = std::exp(-diff.squaredNorm() / (2.0 * h2));
      delta += k * scores.row(j).transpose() + (k / h2) * diff;
    }
    out.row(i) += (step / double(n)) * delta.transpose();
  }
  return out;
}

}  // namespace cdlab
