#pragma once

// Summary statistics for generated two-class point sets: class means,
// between-class centroid distance, and within-class covariance traces.

#include <Eigen/Dense>

#include "cdlab/common.hpp"

namespace cdlab {

struct TwoClassStats {
  Eigen::VectorXd mean0, mean1;
  double centroid_distance = 0.0;
  double within_cov_trace0 = 0.0;
  double within_cov_trace1 = 0.0;
  double mean_within_cov_trace = 0.0;
  Eigen::Index n0 = 0, n1 = 0;
};

// Assign each row to the nearer of two centers (0 or 1).
inline Eigen::VectorXi nearest_mean_assignment(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                               const Eigen::Ref<const Eigen::VectorXd>& center0,
                                               const Eigen::Ref<const Eigen::VectorXd>& center1) {
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d0 = (x.row(i).transpose() - center0).squaredNorm();
    const double d1 = (x.row(i).transpose() - center1).squaredNorm();
    out[i] = d1 < d0 ? 1 : 0;
  }
  return out;
}

inline TwoClassStats two_class_stats(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXi>& class01) {
  require(x.rows() == class01.size(), "two_class_stats: row/label count mismatch");
  const Eigen::Index d = x.cols();
  TwoClassStats s;
  s.mean0 = Eigen::VectorXd::Zero(d);
  s.mean1 = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (class01[i] == 0) {
      s.mean0 += x.row(i);
      ++s.n0;
    } else {
      s.mean1 += x.row(i);
      ++s.n1;
    }
  }
  require(s.n0 >= 1 && s.n1 >= 1, "two_class_stats: both classes must be nonempty");
  s.mean0 /= double(s.n0);
  s.mean1 /= double(s.n1);
  s.centroid_distance = (s.mean1 - s.mean0).norm();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const bool c1 = class01[i] != 0;
    const Eigen::VectorXd dev = x.row(i).transpose() - (c1 ? s.mean1 : s.mean0);
    (c1 ? s.within_cov_trace1 : s.within_cov_trace0) += dev.squaredNorm();
  }
  if (s.n0 > 1) s.within_cov_trace0 /= double(s.n0 - 1);
  if (s.n1 > 1) s.within_cov_trace1 /= double(s.n1 - 1);
  s.mean_within_cov_trace = 0.5 * (s.within_cov_trace0 + s.within_cov_trace1);
  return s;
}

}  // namespace cdlab
