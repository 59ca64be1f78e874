#pragma once

// Self-training pipeline on the Gaussian mixture: intermediate classifier,
// pseudo-labeling, final estimators (pooled average and adversarial logistic
// surrogate), and the repeated-trial experiment driver.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/gaussian.hpp"
#include "cdlab/rng.hpp"

namespace cdlab {

// theta_inter = (1/n) sum y_i x_i.
inline LinearClassifier fit_intermediate(const LabeledDataset& data) {
  require(data.size() >= 1, "fit_intermediate: empty dataset");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.dim());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    theta += data.labels[i] * data.features.row(i).transpose();
  theta /= static_cast<double>(data.size());
  return LinearClassifier{theta};
}

// y_j = sign(theta' x_j), with the tie theta' x = 0 resolved to +1.
inline LabeledDataset assign_pseudo_labels(const LinearClassifier& clf,
                                           const Eigen::MatrixXd& features) {
  require_nondegenerate(clf);
  LabeledDataset out;
  out.features = features;
  out.labels.resize(features.rows());
  const Eigen::VectorXd margins = features * clf.theta;
  for (Eigen::Index i = 0; i < features.rows(); ++i) out.labels[i] = margins[i] >= 0.0 ? 1 : -1;
  return out;
}

// Pooled label-weighted mean over real and pseudo-labeled synthetic data.
inline LinearClassifier fit_final_average(const LabeledDataset& real, const LabeledDataset& synth) {
  const Eigen::Index n = real.size(), m = synth.size();
  require(n + m >= 1, "fit_final_average: both datasets empty");
  const Eigen::Index d = n > 0 ? real.dim() : synth.dim();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) theta += real.labels[i] * real.features.row(i).transpose();
  for (Eigen::Index j = 0; j < m; ++j) theta += synth.labels[j] * synth.features.row(j).transpose();
  theta /= static_cast<double>(n + m);
  return LinearClassifier{theta};
}

struct GdOpts {
  int max_iters = 2000;
  double step = 0.1;
  double grad_tol = 1e-10;  // converged when the full gradient norm drops below this
};

struct AdversarialFitResult {
  LinearClassifier clf;
  bool converged = false;
  double final_objective = 0.0;
};

namespace detail {

// Mean logistic surrogate of the robust 0-1 loss over one dataset:
// mean_i log(1 + exp(-(y_i theta' x_i - eps ||theta||_1))).
// Accumulates the gradient contribution into grad (weighted by w).
inline double robust_logistic_term(const LabeledDataset& ds, const Eigen::VectorXd& theta,
                                   double eps, double w, Eigen::VectorXd& grad) {
  const Eigen::Index n = ds.size();
  const double l1 = theta.lpNorm<1>();
  const Eigen::VectorXd sign_theta =
      theta.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  const Eigen::VectorXd scores = ds.features * theta;
  double loss = 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = ds.labels[i] * scores[i] - eps * l1;
    // log(1 + e^{-m}) computed stably
    loss += m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    const double s = m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
    // d m / d theta = y_i x_i - eps sign(theta); d loss / d m = -s
    g -= s * (ds.labels[i] * ds.features.row(i).transpose() - eps * sign_theta);
  }
  loss /= static_cast<double>(n);
  grad += (w / static_cast<double>(n)) * g;
  return loss;
}

}  // namespace detail

// Full-batch gradient descent on the weighted robust logistic surrogate
//   eta * mean_real phi(margin) + (1-eta) * mean_synth phi(margin),
// phi(m) = log(1+e^{-m}), margin = y theta' x - eps ||theta||_1, with the
// subgradient sign(theta) (sign(0)=0) for the l1 term. Initialized at the
// pooled-average estimator. If one dataset is empty its term is dropped and
// the other gets full weight.
inline AdversarialFitResult fit_final_adversarial(const LabeledDataset& real,
                                                  const LabeledDataset& synth, double eps,
                                                  double eta, const GdOpts& opts = {}) {
  require(real.size() + synth.size() >= 1, "fit_final_adversarial: both datasets empty");
  require(eps >= 0.0, "fit_final_adversarial: eps >= 0 required");
  require(eta > 0.0 && eta <= 1.0, "fit_final_adversarial: eta in (0,1] required");

  double w_real = eta, w_synth = 1.0 - eta;
  if (real.size() == 0) {
    w_real = 0.0;
    w_synth = 1.0;
  } else if (synth.size() == 0) {
    w_real = 1.0;
    w_synth = 0.0;
  }

  Eigen::VectorXd theta = fit_final_average(real, synth).theta;
  Eigen::VectorXd best_theta = theta;
  double best_obj = std::numeric_limits<double>::infinity();
  bool converged = false;

  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    double obj = 0.0;
    if (w_real > 0.0) obj += w_real * detail::robust_logistic_term(real, theta, eps, w_real, grad);
    if (w_synth > 0.0)
      obj += w_synth * detail::robust_logistic_term(synth, theta, eps, w_synth, grad);
    if (!std::isfinite(obj)) throw training_diverged_error(it);
    if (obj < best_obj) {
      best_obj = obj;
      best_theta = theta;
    }
    if (grad.norm() <= opts.grad_tol) {
      converged = true;
      break;
    }
    theta -= opts.step * grad;
  }
  return AdversarialFitResult{LinearClassifier{best_theta}, converged, best_obj};
}

// Clean and robust accuracy on a finite test set; robust uses the exact
// linear l-infinity attack (margin y theta' x - eps ||theta||_1 > 0).
struct AccuracyPair {
  double clean = 0.0;
  double robust = 0.0;
};

inline AccuracyPair empirical_accuracy(const LinearClassifier& clf, const LabeledDataset& test,
                                       double eps) {
  require_nondegenerate(clf);
  require(test.size() >= 1, "empirical_accuracy: empty test set");
  require(eps >= 0.0, "empirical_accuracy: eps >= 0 required");
  const double l1 = clf.theta.lpNorm<1>();
  const Eigen::VectorXd scores = test.features * clf.theta;
  Eigen::Index clean_ok = 0, robust_ok = 0;
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    const double m = test.labels[i] * scores[i];
    if (m > 0.0) ++clean_ok;
    if (m - eps * l1 > 0.0) ++robust_ok;
  }
  const double n = static_cast<double>(test.size());
  return AccuracyPair{clean_ok / n, robust_ok / n};
}

// ceil((288 n / c) * eps^2 * sqrt(d/n))
inline std::uint64_t theorem2_threshold(std::uint64_t n, std::uint64_t d, double eps, double c) {
  require(n >= 1 && d >= 1, "theorem2_threshold: n, d >= 1 required");
  require(eps > 0.0 && c > 0.0, "theorem2_threshold: eps, c > 0 required");
  const double value = 288.0 * static_cast<double>(n) / c * eps * eps *
                       std::sqrt(static_cast<double>(d) / static_cast<double>(n));
  return static_cast<std::uint64_t>(std::ceil(value));
}

enum class SynthMeanMode {
  kScaledMu,       // mu_tilde = c * mu
  kRobustShifted,  // mu_tilde = c * (mu - eps * 1_d)
  kOrthogonal,     // mu_tilde = c * ||mu|| * (unit vector orthogonal to mu)
};

enum class FinalEstimator { kAverage, kAdversarialSurrogate };
enum class FinalFitData { kPooled, kSyntheticOnly };

struct SelfTrainConfig {
  Eigen::Index d = 2;
  Eigen::Index n = 100;        // real samples
  Eigen::Index n_tilde = 100;  // synthetic samples
  double c = 1.0;
  double eps = 0.5;
  double sigma = 1.0;
  double mu_norm2 = 2.0;        // ||mu||^2
  double mu_angle_deg = 0.0;    // angle between mu and 1_d
  SynthMeanMode synth_mean_mode = SynthMeanMode::kScaledMu;
  // Use the synthetic generating labels instead of pseudo-labels. Matches the
  // idealization where label noise is independent of the feature noise; with
  // actual pseudo-labels the sign(theta'x)-feature correlation adds a
  // sqrt(2/pi)*sigma component along theta_inter to the final estimator.
  bool oracle_synth_labels = false;
  FinalEstimator estimator = FinalEstimator::kAverage;
  FinalFitData final_fit = FinalFitData::kPooled;
  double eta = 0.5;
  int trials = 50;
  Eigen::Index holdout = 10000;  // 0 disables empirical evaluation
  std::uint64_t seed = 0;
  GdOpts gd = {};

  void validate() const {
    require(d >= 1 && n >= 1 && trials >= 1, "SelfTrainConfig: d, n, trials >= 1 required");
    require(n_tilde >= 0 && holdout >= 0, "SelfTrainConfig: counts must be nonnegative");
    require(c > 0.0, "SelfTrainConfig: c > 0 required");
    require(eps >= 0.0, "SelfTrainConfig: eps >= 0 required");
    require(sigma > 0.0, "SelfTrainConfig: sigma > 0 required");
    require(mu_norm2 > 0.0, "SelfTrainConfig: mu_norm2 > 0 required");
    require(mu_angle_deg >= 0.0 && mu_angle_deg <= 90.0,
            "SelfTrainConfig: angle in [0, 90] degrees required");
    require(eta > 0.0 && eta <= 1.0, "SelfTrainConfig: eta in (0,1] required");
  }
};

// mu lives in the plane spanned by 1_d and a fixed orthogonal reference
// direction (e1 projected off 1_d, normalized), rotated by the configured
// angle away from 1_d.
inline Eigen::VectorXd make_mu(Eigen::Index d, double norm2, double angle_deg) {
  require(d >= 1, "make_mu: d >= 1 required");
  const double angle = angle_deg * std::numbers::pi / 180.0;
  Eigen::VectorXd ones_dir = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
  Eigen::VectorXd mu;
  if (angle_deg == 0.0 || d == 1) {
    mu = ones_dir;
  } else {
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(d);
    ref[0] = 1.0;
    ref -= ref.dot(ones_dir) * ones_dir;
    ref.normalize();
    mu = std::cos(angle) * ones_dir + std::sin(angle) * ref;
  }
  return std::sqrt(norm2) * mu;
}

inline Eigen::VectorXd synthetic_mean(const SelfTrainConfig& cfg, const Eigen::VectorXd& mu) {
  switch (cfg.synth_mean_mode) {
    case SynthMeanMode::kScaledMu:
      return cfg.c * mu;
    case SynthMeanMode::kRobustShifted:
      return cfg.c * (mu - cfg.eps * Eigen::VectorXd::Ones(mu.size()));
    case SynthMeanMode::kOrthogonal: {
      // rotate mu by 90 degrees within the (1_d, reference) plane
      const Eigen::Index d = mu.size();
      require(d >= 2, "orthogonal synthetic mean needs d >= 2");
      Eigen::VectorXd ones_dir = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(double(d)));
      Eigen::VectorXd ref = Eigen::VectorXd::Zero(d);
      ref[0] = 1.0;
      ref -= ref.dot(ones_dir) * ones_dir;
      ref.normalize();
      const double a = mu.dot(ones_dir), b = mu.dot(ref);
      Eigen::VectorXd perp = -b * ones_dir + a * ref;  // same norm as mu, orthogonal to it
      return cfg.c * perp;
    }
  }
  throw std::logic_error("unreachable");
}

struct TrialResult {
  double clean_closed_form = 0.0;
  double robust_closed_form = 0.0;
  double clean_empirical = std::numeric_limits<double>::quiet_NaN();
  double robust_empirical = std::numeric_limits<double>::quiet_NaN();
  double gamma_hat = 0.0;  // 1 - 2 * pseudo-label error fraction on the synthetic set
  bool fit_converged = true;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n-1)
};

inline Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  double s = 0.0;
  for (double x : xs) s += x;
  a.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return a;
}

struct ExperimentReport {
  SelfTrainConfig config;
  std::vector<TrialResult> trials;
  Aggregate clean_closed_form, robust_closed_form;
  Aggregate clean_empirical, robust_empirical;
  Aggregate gamma_hat;
  double wall_seconds = 0.0;
};

// One trial of the pipeline: sample real data, fit the intermediate
// classifier, sample synthetic features with true generating labels, assign
// pseudo-labels, fit the final estimator, evaluate.
//
// Trial streams: real data (stream 1), synthetic noise (stream 2), holdout
// (stream 3), all derived from the per-trial seed. Synthetic features reuse
// the same noise draws across different c for paired-seed comparisons.
inline TrialResult run_gaussian_trial(const SelfTrainConfig& cfg, const Eigen::VectorXd& mu,
                                      std::uint64_t trial_seed) {
  const MixtureSpec true_spec(mu, cfg.sigma);
  const LabeledDataset real = sample_dataset(true_spec, cfg.n, derive_seed(trial_seed, 1));
  const LinearClassifier inter = fit_intermediate(real);

  TrialResult tr;
  LinearClassifier final_clf;

  LabeledDataset synth;  // pseudo-labeled
  if (cfg.n_tilde > 0) {
    const Eigen::VectorXd mu_tilde = synthetic_mean(cfg, mu);
    Rng rng(derive_seed(trial_seed, 2));
    Eigen::MatrixXd features(cfg.n_tilde, cfg.d);
    Eigen::VectorXi true_labels(cfg.n_tilde);
    for (Eigen::Index i = 0; i < cfg.n_tilde; ++i) {
      const int y = rng.sign();
      true_labels[i] = y;
      for (Eigen::Index j = 0; j < cfg.d; ++j)
        features(i, j) = y * mu_tilde[j] + cfg.sigma * rng.normal();
    }
    synth = assign_pseudo_labels(inter, features);
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < cfg.n_tilde; ++i)
      if (synth.labels[i] != true_labels[i]) ++wrong;
    tr.gamma_hat = 1.0 - 2.0 * static_cast<double>(wrong) / static_cast<double>(cfg.n_tilde);
    if (cfg.oracle_synth_labels) synth.labels = true_labels;
  } else {
    tr.gamma_hat = 1.0;
  }

  const bool synth_only = cfg.final_fit == FinalFitData::kSyntheticOnly && cfg.n_tilde > 0;
  const LabeledDataset empty{Eigen::MatrixXd(0, cfg.d), Eigen::VectorXi(0)};
  const LabeledDataset& fit_real = synth_only ? empty : real;

  if (cfg.estimator == FinalEstimator::kAverage) {
    final_clf = fit_final_average(fit_real, synth);
  } else {
    auto res = fit_final_adversarial(fit_real, synth, cfg.eps, cfg.eta, cfg.gd);
    final_clf = res.clf;
    tr.fit_converged = res.converged;
  }

  tr.clean_closed_form = 1.0 - standard_error(final_clf, true_spec);
  tr.robust_closed_form = 1.0 - robust_error(final_clf, true_spec, cfg.eps);

  if (cfg.holdout > 0) {
    const LabeledDataset test = sample_dataset(true_spec, cfg.holdout, derive_seed(trial_seed, 3));
    const AccuracyPair acc = empirical_accuracy(final_clf, test, cfg.eps);
    tr.clean_empirical = acc.clean;
    tr.robust_empirical = acc.robust;
  }
  return tr;
}

inline ExperimentReport run_gaussian_experiment(const SelfTrainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const Eigen::VectorXd mu = make_mu(cfg.d, cfg.mu_norm2, cfg.mu_angle_deg);

  ExperimentReport rep;
  rep.config = cfg;
  rep.trials.reserve(cfg.trials);
  for (int t = 0; t < cfg.trials; ++t)
    rep.trials.push_back(run_gaussian_trial(cfg, mu, derive_seed(cfg.seed, t)));

  std::vector<double> ccf, rcf, cemp, remp, gam;
  for (const auto& tr : rep.trials) {
    ccf.push_back(tr.clean_closed_form);
    rcf.push_back(tr.robust_closed_form);
    gam.push_back(tr.gamma_hat);
    if (cfg.holdout > 0) {
      cemp.push_back(tr.clean_empirical);
      remp.push_back(tr.robust_empirical);
    }
  }
  rep.clean_closed_form = aggregate(ccf);
  rep.robust_closed_form = aggregate(rcf);
  rep.clean_empirical = aggregate(cemp);
  rep.robust_empirical = aggregate(remp);
  rep.gamma_hat = aggregate(gam);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace cdlab
