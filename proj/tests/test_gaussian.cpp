#include <doctest.h>

#include "cdlab/gaussian.hpp"
#include "oracles.hpp"

using namespace cdlab;

TEST_CASE("q_function matches quadrature") {
  for (double x : {-4.0, -1.5, -0.3, 0.0, 0.2, 0.7071, 1.0, 2.5, 5.0})
    CHECK(std::abs(q_function(x) - oracles::q_quadrature(x)) < 1e-11);
  CHECK(q_function(0.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(q_function(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
}

TEST_CASE("closed-form errors match exact-attack Monte Carlo") {
  Rng meta(7);
  for (int inst = 0; inst < 6; ++inst) {
    const Eigen::Index d = (inst % 3 == 0) ? 2 : (inst % 3 == 1 ? 5 : 20);
    Eigen::VectorXd mu = meta.normal_vector(d);
    mu += Eigen::VectorXd::Constant(d, 0.5);  // keep signal away from zero
    const double sigma = 0.5 + meta.uniform();
    const double eps = 0.3 * meta.uniform();
    const MixtureSpec spec(mu, sigma);
    LinearClassifier clf{mu + 0.3 * meta.normal_vector(d)};

    const int n = 200000;
    Rng rng(derive_seed(99, inst));
    int clean_wrong = 0, robust_wrong = 0;
    const double l1 = clf.theta.lpNorm<1>();
    for (int i = 0; i < n; ++i) {
      const int y = rng.sign();
      double score = 0.0;
      for (Eigen::Index j = 0; j < d; ++j)
        score += clf.theta[j] * (y * mu[j] + sigma * rng.normal());
      if (y * score <= 0.0) ++clean_wrong;
      // exact attack shifts the margin by eps*||theta||_1
      if (y * score - eps * l1 <= 0.0) ++robust_wrong;
    }
    const double mc_clean = double(clean_wrong) / n;
    const double mc_robust = double(robust_wrong) / n;
    // band from the closed-form p: with p ~ 0 the empirical band collapses
    const double cf_clean = standard_error(clf, spec);
    const double cf_robust = robust_error(clf, spec, eps);
    CHECK(std::abs(cf_clean - mc_clean) <
          oracles::binom_band(cf_clean, n, 4.0) + 1.0 / n);
    CHECK(std::abs(cf_robust - mc_robust) <
          oracles::binom_band(cf_robust, n, 4.0) + 1.0 / n);
  }
}

TEST_CASE("worst-case perturbation flips the margin by eps*l1") {
  LinearClassifier clf{Eigen::Vector3d(1.0, -2.0, 0.0)};
  const Eigen::VectorXd delta = worst_case_perturbation(clf, 1, 0.5);
  CHECK(delta[0] == doctest::Approx(-0.5));
  CHECK(delta[1] == doctest::Approx(0.5));
  CHECK(delta[2] == 0.0);  // sign(0) = 0
  // margin reduction equals eps * ||theta||_1
  CHECK(clf.theta.dot(delta) == doctest::Approx(-0.5 * 3.0));
  const Eigen::VectorXd delta_neg = worst_case_perturbation(clf, -1, 0.5);
  CHECK((delta + delta_neg).norm() == 0.0);
}

TEST_CASE("optimal robust direction hard-thresholds mu") {
  Eigen::Vector3d mu(2.0, 0.3, -1.0);
  const LinearClassifier clf = optimal_robust_direction(mu, 0.5);
  Eigen::Vector3d expect(1.5, 0.0, -0.5);
  expect.normalize();
  CHECK((clf.theta - expect).norm() < 1e-15);
  CHECK(clf.theta.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(optimal_robust_direction(Eigen::Vector2d(0.1, -0.2), 0.5),
                  no_robust_direction_error);
}

TEST_CASE("optimal direction minimizes robust error among candidates") {
  Eigen::VectorXd mu(4);
  mu << 1.0, 0.4, 0.2, 0.05;
  const double eps = 0.3, sigma = 1.0;
  const MixtureSpec spec(mu, sigma);
  const LinearClassifier star = optimal_robust_direction(mu, eps);
  const double best = robust_error(star, spec, eps);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    LinearClassifier cand{mu + rng.normal_vector(4)};
    if (cand.theta.norm() == 0.0) continue;
    CHECK(robust_error(cand, spec, eps) >= best - 1e-12);
  }
}

TEST_CASE("sample_dataset moments and determinism") {
  Eigen::Vector2d mu(1.0, -2.0);
  const MixtureSpec spec(mu, 0.7);
  const auto ds = sample_dataset(spec, 50000, 42);
  ds.validate();
  const auto ds2 = sample_dataset(spec, 50000, 42);
  CHECK((ds.features - ds2.features).norm() == 0.0);
  // y*x has mean mu and per-coordinate variance sigma^2
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < ds.size(); ++i) acc += ds.labels[i] * ds.features.row(i).transpose();
  acc /= double(ds.size());
  CHECK((acc - mu).cwiseAbs().maxCoeff() < 4.0 * 0.7 / std::sqrt(50000.0));
}

TEST_CASE("degenerate classifiers are rejected") {
  const MixtureSpec spec(Eigen::Vector2d(1.0, 1.0), 1.0);
  LinearClassifier zero{Eigen::Vector2d::Zero()};
  CHECK_THROWS_AS(standard_error(zero, spec), degenerate_classifier_error);
  CHECK_THROWS_AS(robust_error(zero, spec, 0.1), degenerate_classifier_error);
}
