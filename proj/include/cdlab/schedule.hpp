#pragma once

// Forward-process noise schedule. Stores both the per-step retention factors
// alpha_t and the cumulative products alpha_bar_t explicitly: the DDPM
// ancestral sampler consumes per-step alpha, the DDIM-style samplers consume
// the cumulative alpha_bar.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"

namespace cdlab {

struct NoiseSchedule {
  int T = 0;
  Eigen::VectorXd alpha;      // per-step, alpha[t-1] is alpha_t
  Eigen::VectorXd alpha_bar;  // cumulative products

  double alpha_at(int t) const { return alpha[t - 1]; }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }

  void validate() const {
    require(T >= 1 && alpha.size() == T && alpha_bar.size() == T,
            "NoiseSchedule: inconsistent sizes");
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
      require(alpha[t] > 0.0 && alpha[t] < 1.0, "NoiseSchedule: alpha_t must be in (0,1)");
      prod *= alpha[t];
      require(std::abs(alpha_bar[t] - prod) <= 1e-12 * std::max(1.0, std::abs(prod)),
              "NoiseSchedule: alpha_bar is not the running product of alpha");
      if (t > 0)
        require(alpha_bar[t] < alpha_bar[t - 1], "NoiseSchedule: alpha_bar must be decreasing");
    }
  }
};

enum class ScheduleKind { kLinearBeta, kCosine };

struct ScheduleParams {
  double beta1 = 1e-4;
  double betaT = 0.02;
  double cosine_s = 0.008;
};

inline NoiseSchedule build_schedule(ScheduleKind kind, int T, const ScheduleParams& params = {}) {
  require(T >= 1, "build_schedule: T >= 1 required");
  NoiseSchedule s;
  s.T = T;
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  if (kind == ScheduleKind::kLinearBeta) {
    for (int t = 0; t < T; ++t) {
      const double beta =
          T == 1 ? params.beta1
                 : params.beta1 + (params.betaT - params.beta1) * double(t) / double(T - 1);
      require(beta > 0.0 && beta < 1.0, "build_schedule: beta_t outside (0,1)");
      s.alpha[t] = 1.0 - beta;
    }
  } else {
    const auto f = [&](double t) {
      const double v = (t / T + params.cosine_s) / (1.0 + params.cosine_s) * std::numbers::pi / 2.0;
      return std::cos(v) * std::cos(v);
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double bar = f(double(t)) / f0;
      double a = bar / prev;
      a = std::max(a, 0.001);  // clip beta at 0.999, standard cosine-schedule guard
      require(a > 0.0 && a < 1.0, "build_schedule: cosine schedule produced alpha outside (0,1)");
      s.alpha[t - 1] = a;
      prev *= a;
    }
  }
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  s.validate();
  return s;
}

// Quadratic subsequence of sampling steps: t_i = 1 + floor(i^2 T / S^2),
// deduplicated. S == T returns the full range.
inline std::vector<int> quadratic_subsequence(int T, int S) {
  require(S >= 1 && T >= 1, "quadratic_subsequence: S, T >= 1 required");
  require(S <= T, "quadratic_subsequence: S <= T required");
  std::vector<int> steps;
  if (S == T) {
    steps.resize(T);
    for (int i = 0; i < T; ++i) steps[i] = i + 1;
    return steps;
  }
  for (long i = 0; i < S; ++i) {
    const int t = static_cast<int>(1 + (i * i * long(T)) / (long(S) * S));
    if (steps.empty() || t > steps.back()) steps.push_back(t);
  }
  return steps;
}

inline void validate_subsequence(const std::vector<int>& subseq, int T) {
  require(!subseq.empty(), "subsequence must be nonempty");
  int prev = 0;
  for (int t : subseq) {
    require(t >= 1 && t <= T, "subsequence step out of range");
    require(t > prev, "subsequence must be strictly increasing");
    prev = t;
  }
}

}  // namespace cdlab
