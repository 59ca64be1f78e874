#include <doctest.h>

#include <limits>

#include "cdlab/self_training.hpp"
#include "oracles.hpp"

using namespace cdlab;

TEST_CASE("intermediate classifier is the label-weighted mean") {
  LabeledDataset ds;
  ds.features.resize(3, 2);
  ds.features << 1.0, 0.0, 0.0, 2.0, -1.0, 1.0;
  ds.labels.resize(3);
  ds.labels << 1, -1, 1;
  const auto clf = fit_intermediate(ds);
  CHECK(clf.theta[0] == doctest::Approx(0.0 / 3.0));
  CHECK(clf.theta[1] == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("pseudo labels break ties to +1") {
  LinearClassifier clf{Eigen::Vector2d(1.0, 0.0)};
  Eigen::MatrixXd x(3, 2);
  x << 2.0, 0.0, -3.0, 1.0, 0.0, 5.0;  // last row has zero margin
  const auto labeled = assign_pseudo_labels(clf, x);
  CHECK(labeled.labels[0] == 1);
  CHECK(labeled.labels[1] == -1);
  CHECK(labeled.labels[2] == 1);
}

TEST_CASE("final average pools both datasets") {
  LabeledDataset real;
  real.features.resize(1, 2);
  real.features << 2.0, 0.0;
  real.labels.resize(1);
  real.labels << 1;
  LabeledDataset synth;
  synth.features.resize(2, 2);
  synth.features << 0.0, 4.0, 1.0, 1.0;
  synth.labels.resize(2);
  synth.labels << -1, 1;
  const auto clf = fit_final_average(real, synth);
  CHECK(clf.theta[0] == doctest::Approx((2.0 - 0.0 + 1.0) / 3.0));
  CHECK(clf.theta[1] == doctest::Approx((0.0 - 4.0 + 1.0) / 3.0));
}

TEST_CASE("theorem2 threshold arithmetic") {
  CHECK(theorem2_threshold(4, 6000, 0.5, 1.0) == 11155);
  CHECK(theorem2_threshold(100, 100, 0.1, 1.0) ==
        static_cast<std::uint64_t>(std::ceil(288.0 * 100.0 * 0.01 * 1.0)));
  CHECK_THROWS_AS(theorem2_threshold(4, 6000, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("adversarial surrogate objective decreases and gradient is exact") {
  Rng rng(5);
  LabeledDataset real;
  real.features = rng.normal_matrix(40, 3);
  real.labels.resize(40);
  for (int i = 0; i < 40; ++i) {
    real.labels[i] = rng.sign();
    real.features.row(i) += real.labels[i] * Eigen::RowVector3d(1.0, 0.8, -0.5);
  }
  LabeledDataset synth;
  synth.features = Eigen::MatrixXd(0, 3);
  synth.labels = Eigen::VectorXi(0);

  const double eps = 0.2;
  // finite-difference check of the surrogate gradient at a random theta
  Eigen::VectorXd theta = rng.normal_vector(3);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(3);
  const double loss = detail::robust_logistic_term(real, theta, eps, 1.0, grad);
  const auto f = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
    return detail::robust_logistic_term(real, th, eps, 1.0, g);
  };
  CHECK(loss > 0.0);
  CHECK(oracles::rel_err(grad, oracles::fd_grad(f, theta)) < 1e-6);

  GdOpts opts;
  opts.max_iters = 300;
  const auto res = fit_final_adversarial(real, synth, eps, 1.0, opts);
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(3);
  const double init_obj =
      detail::robust_logistic_term(real, fit_final_average(real, synth).theta, eps, 1.0, g0);
  CHECK(res.final_objective < init_obj);
}

TEST_CASE("empirical accuracy uses the exact attack margin") {
  LinearClassifier clf{Eigen::Vector2d(1.0, -1.0)};  // l1 = 2
  LabeledDataset test;
  test.features.resize(2, 2);
  test.features << 1.0, 0.0,   // margin +1: clean ok, robust (eps=0.4) ok (1 - 0.8 > 0)
      0.3, 0.0;                // margin 0.3: clean ok, robust fails
  test.labels.resize(2);
  test.labels << 1, 1;
  const auto acc = empirical_accuracy(clf, test, 0.4);
  CHECK(acc.clean == doctest::Approx(1.0));
  CHECK(acc.robust == doctest::Approx(0.5));
}

TEST_CASE("make_mu respects norm and angle") {
  const Eigen::VectorXd mu0 = make_mu(4, 2.0, 0.0);
  CHECK(mu0.squaredNorm() == doctest::Approx(2.0));
  CHECK((mu0 - Eigen::VectorXd::Constant(4, std::sqrt(0.5))).norm() < 1e-12);
  const Eigen::VectorXd mu45 = make_mu(4, 2.0, 45.0);
  CHECK(mu45.squaredNorm() == doctest::Approx(2.0));
  const double cosang = mu45.dot(Eigen::VectorXd::Ones(4)) / (mu45.norm() * 2.0);
  CHECK(cosang == doctest::Approx(std::cos(std::numbers::pi / 4.0)));
}

TEST_CASE("synthetic mean modes") {
  SelfTrainConfig cfg;
  cfg.d = 4;
  cfg.c = 1.5;
  cfg.eps = 0.5;
  const Eigen::VectorXd mu = make_mu(4, 2.0, 30.0);

  cfg.synth_mean_mode = SynthMeanMode::kScaledMu;
  CHECK((synthetic_mean(cfg, mu) - 1.5 * mu).norm() < 1e-14);

  cfg.synth_mean_mode = SynthMeanMode::kRobustShifted;
  CHECK((synthetic_mean(cfg, mu) - 1.5 * (mu - 0.5 * Eigen::VectorXd::Ones(4))).norm() < 1e-14);

  cfg.synth_mean_mode = SynthMeanMode::kOrthogonal;
  const Eigen::VectorXd perp = synthetic_mean(cfg, mu);
  CHECK(std::abs(perp.dot(mu)) < 1e-12);
  CHECK(perp.norm() == doctest::Approx(1.5 * mu.norm()));
}

TEST_CASE("experiment driver is deterministic and paired across c") {
  SelfTrainConfig cfg;
  cfg.d = 10;
  cfg.n = 20;
  cfg.n_tilde = 30;
  cfg.trials = 3;
  cfg.holdout = 500;
  cfg.mu_norm2 = 4.0;
  cfg.eps = 0.1;
  cfg.estimator = FinalEstimator::kAverage;
  cfg.seed = 123;
  const auto r1 = run_gaussian_experiment(cfg);
  const auto r2 = run_gaussian_experiment(cfg);
  for (int t = 0; t < cfg.trials; ++t) {
    CHECK(r1.trials[t].robust_closed_form == r2.trials[t].robust_closed_form);
    CHECK(r1.trials[t].clean_empirical == r2.trials[t].clean_empirical);
  }
  // gamma is a NaN-free, bounded summary
  CHECK(r1.gamma_hat.mean <= 1.0);
  CHECK(r1.gamma_hat.mean >= -1.0);
}

TEST_CASE("holdout=0 disables empirical evaluation") {
  SelfTrainConfig cfg;
  cfg.trials = 2;
  cfg.holdout = 0;
  cfg.estimator = FinalEstimator::kAverage;
  const auto rep = run_gaussian_experiment(cfg);
  CHECK(std::isnan(rep.trials[0].clean_empirical));
  CHECK(std::isfinite(rep.trials[0].clean_closed_form));
}
