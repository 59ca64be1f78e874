#pragma once

// Two-component Gaussian mixture data model for binary linear classification,
// with closed-form standard/robust error probabilities under the exact
// l-infinity attack on linear classifiers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/rng.hpp"

namespace cdlab {

// Upper-tail probability of the standard normal, Q(x) = P(Z > x).
// erfc-based; absolute error well below 1e-12 over the range of interest.
inline double q_function(double x) {
  if (!std::isfinite(x)) throw std::domain_error("q_function: non-finite input");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

// x | y ~ N(y*mu, sigma^2 I), y uniform on {-1,+1}.
struct MixtureSpec {
  Eigen::VectorXd mu;
  double sigma = 1.0;

  MixtureSpec(Eigen::VectorXd mu_, double sigma_) : mu(std::move(mu_)), sigma(sigma_) {
    require(mu.size() >= 1, "MixtureSpec: d >= 1 required");
    require(mu.allFinite(), "MixtureSpec: mu must be finite");
    require(mu.cwiseAbs().maxCoeff() > 0.0, "MixtureSpec: mu must be nonzero");
    require(std::isfinite(sigma) && sigma > 0.0, "MixtureSpec: sigma > 0 required");
  }

  // Zero-noise variant is allowed for exact tests; sigma == 0 means features
  // equal y*mu exactly.
  static MixtureSpec noiseless(Eigen::VectorXd mu_) {
    MixtureSpec s(std::move(mu_), 1.0);
    s.sigma = 0.0;
    return s;
  }

  Eigen::Index dim() const { return mu.size(); }
};

struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d, one sample per row
  Eigen::VectorXi labels;    // entries in {-1,+1}

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  void validate() const {
    require(features.rows() == labels.size(), "LabeledDataset: row/label count mismatch");
    require(features.allFinite(), "LabeledDataset: non-finite feature");
    for (Eigen::Index i = 0; i < labels.size(); ++i)
      require(labels[i] == 1 || labels[i] == -1, "LabeledDataset: labels must be +-1");
  }
};

// f(x) = sign(theta' x), ties broken to +1.
struct LinearClassifier {
  Eigen::VectorXd theta;

  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return theta.dot(x) >= 0.0 ? 1 : -1;
  }
};

inline void require_nondegenerate(const LinearClassifier& clf) {
  if (!(clf.theta.size() > 0) || clf.theta.norm() == 0.0 || !clf.theta.allFinite())
    throw degenerate_classifier_error("classifier weight vector is zero or non-finite");
}

// Labels uniform on {-1,+1}; feature row = y*mu + sigma*z. Draw order per
// sample: label first, then d normal coordinates, so results are a pure
// function of the seed.
inline LabeledDataset sample_dataset(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed) {
  require(n >= 1, "sample_dataset: n >= 1 required");
  Rng rng(seed);
  const Eigen::Index d = spec.dim();
  LabeledDataset ds;
  ds.features.resize(n, d);
  ds.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = rng.sign();
    ds.labels[i] = y;
    for (Eigen::Index j = 0; j < d; ++j)
      ds.features(i, j) = y * spec.mu[j] + spec.sigma * rng.normal();
  }
  return ds;
}

// err_standard = Q(mu' theta / (sigma ||theta||)).
inline double standard_error(const LinearClassifier& clf, const MixtureSpec& spec) {
  require_nondegenerate(clf);
  require(clf.theta.size() == spec.dim(), "standard_error: dimension mismatch");
  return q_function(spec.mu.dot(clf.theta) / (spec.sigma * clf.theta.norm()));
}

// err_robust = Q((mu' theta - eps ||theta||_1) / (sigma ||theta||)).
inline double robust_error(const LinearClassifier& clf, const MixtureSpec& spec, double eps) {
  require_nondegenerate(clf);
  require(clf.theta.size() == spec.dim(), "robust_error: dimension mismatch");
  require(eps >= 0.0, "robust_error: eps >= 0 required");
  const double l2 = clf.theta.norm();
  const double l1 = clf.theta.lpNorm<1>();
  return q_function((spec.mu.dot(clf.theta) - eps * l1) / (spec.sigma * l2));
}

// Exact worst-case l-infinity perturbation for a linear classifier:
// delta = -eps * y * sign(theta), with sign(0) = 0.
inline Eigen::VectorXd worst_case_perturbation(const LinearClassifier& clf, int y, double eps) {
  return (-eps * y) * clf.theta.unaryExpr([](double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  });
}

// theta* = T_eps(mu) / ||T_eps(mu)||, hard-thresholding each coordinate.
inline LinearClassifier optimal_robust_direction(const Eigen::VectorXd& mu, double eps) {
  require(eps >= 0.0, "optimal_robust_direction: eps >= 0 required");
  require(mu.allFinite(), "optimal_robust_direction: mu must be finite");
  Eigen::VectorXd t = mu.unaryExpr([eps](double m) {
    const double shrunk = std::max(std::abs(m) - eps, 0.0);
    return m >= 0.0 ? shrunk : -shrunk;
  });
  const double norm = t.norm();
  if (norm == 0.0)
    throw no_robust_direction_error("hard-thresholding removed all coordinates (eps too large)");
  return LinearClassifier{t / norm};
}

}  // namespace cdlab
