#pragma once

// Synthetic-pool selection criteria: embedding separability, per-sample
// gradient norm of a reference multinomial logistic classifier (optionally
// at the exact l-infinity attacked input), and predictive entropy. All
// criteria return index sets into the pool, k per class, ties broken by
// lower index.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdlab/common.hpp"
#include "cdlab/gaussian.hpp"
#include "cdlab/guidance.hpp"

namespace cdlab {

struct LogisticModel {
  Eigen::MatrixXd W;  // num_classes x d
  Eigen::VectorXd b;

  int num_classes() const { return static_cast<int>(W.rows()); }

  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd z = W * x + b;
    const double mx = z.maxCoeff();
    Eigen::VectorXd p = (z.array() - mx).exp();
    return p / p.sum();
  }

  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd p = predict_proba(x);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c)
      if (p[c] > p[best]) best = c;
    return static_cast<int>(best);
  }

  // Full-batch gradient descent on mean cross-entropy, zero init.
  static LogisticModel fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::VectorXi>& y, int num_classes,
                           long iters = 500, double lr = 0.5) {
    const Eigen::Index n = X.rows(), d = X.cols();
    require(n >= 1, "LogisticModel::fit: empty data");
    require(y.size() == n, "LogisticModel::fit: label count mismatch");
    require(num_classes >= 2, "LogisticModel::fit: need >= 2 classes");
    for (Eigen::Index i = 0; i < n; ++i)
      require(y[i] >= 0 && y[i] < num_classes, "LogisticModel::fit: label out of range");
    LogisticModel m;
    m.W = Eigen::MatrixXd::Zero(num_classes, d);
    m.b = Eigen::VectorXd::Zero(num_classes);
    for (long it = 0; it < iters; ++it) {
      Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(num_classes, d);
      Eigen::VectorXd gb = Eigen::VectorXd::Zero(num_classes);
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd p = m.predict_proba(X.row(i));
        p[y[i]] -= 1.0;
        gW += p * X.row(i);
        gb += p;
      }
      m.W -= (lr / double(n)) * gW;
      m.b -= (lr / double(n)) * gb;
    }
    return m;
  }
};

struct ScoredPool {
  Eigen::MatrixXd pool;
  Eigen::VectorXi labels;
  Eigen::VectorXd scores;
  std::string criterion;
};

struct SelectionResult {
  std::vector<Eigen::Index> indices;  // sorted ascending, k per class
  Eigen::VectorXd scores;             // one score per pool row
};

namespace detail {

// Top-k per class by score, smallest or largest first, ties by lower index.
inline std::vector<Eigen::Index> per_class_topk(const Eigen::Ref<const Eigen::VectorXi>& labels,
                                                const Eigen::VectorXd& scores, Eigen::Index k,
                                                bool smallest) {
  require(k >= 1, "selection: k >= 1 required");
  require(labels.size() == scores.size(), "selection: label/score length mismatch");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<Eigen::Index> out;
  for (auto& [cls, idx] : groups) {
    if (static_cast<Eigen::Index>(idx.size()) < k)
      throw insufficient_class_size_error("selection: class " + std::to_string(cls) + " has " +
                                          std::to_string(idx.size()) + " members, need " +
                                          std::to_string(k));
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (scores[a] != scores[b]) return smallest ? scores[a] < scores[b] : scores[a] > scores[b];
      return a < b;
    });
    out.insert(out.end(), idx.begin(), idx.begin() + k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Score = sum over classes of the L2 distance from the sample's embedding to
// that class's embedding centroid; keep the k smallest per (given) class.
inline SelectionResult separability_select(const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                           const Eigen::Ref<const Eigen::VectorXi>& labels,
                                           const FeatureExtractor& extractor, Eigen::Index k) {
  const Eigen::Index n = pool.rows();
  require(n >= 1 && labels.size() == n, "separability_select: pool/label size mismatch");
  const Eigen::Index ed = extractor.out_dim(pool.cols());
  Eigen::MatrixXd emb(n, ed);
  for (Eigen::Index i = 0; i < n; ++i) emb.row(i) = extractor.apply(pool.row(i));
  std::map<int, std::pair<Eigen::VectorXd, Eigen::Index>> acc;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto it = acc.find(labels[i]);
    if (it == acc.end())
      acc.emplace(labels[i], std::make_pair(Eigen::VectorXd(emb.row(i)), Eigen::Index{1}));
    else {
      it->second.first += emb.row(i);
      it->second.second += 1;
    }
  }
  std::vector<Eigen::VectorXd> centroids;
  for (const auto& [cls, sum_count] : acc)
    centroids.push_back(sum_count.first / double(sum_count.second));
  SelectionResult res;
  res.scores.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& c : centroids) s += (emb.row(i).transpose() - c).norm();
    res.scores[i] = s;
  }
  res.indices = detail::per_class_topk(labels, res.scores, k, /*smallest=*/true);
  return res;
}

// Score = L2 norm of the per-sample parameter gradient of cross-entropy under
// the reference model, ||p - e_y|| * sqrt(||x||^2 + 1). With robust=true the
// loss is evaluated at the exact l-infinity attacked input (binary models
// only, using the class-1-minus-class-0 weight direction); keep the k largest
// per class.
inline SelectionResult gradient_norm_select(const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                            const Eigen::Ref<const Eigen::VectorXi>& labels,
                                            const LogisticModel& clf, Eigen::Index k,
                                            bool robust = false, double eps = 0.0) {
  const Eigen::Index n = pool.rows();
  require(n >= 1 && labels.size() == n, "gradient_norm_select: pool/label size mismatch");
  require(clf.W.cols() == pool.cols(), "gradient_norm_select: dimension mismatch");
  require(eps >= 0.0, "gradient_norm_select: eps >= 0 required");
  if (robust && eps > 0.0)
    require(clf.num_classes() == 2,
            "gradient_norm_select: robust variant requires a binary reference model");
  const LinearClassifier attack_dir{robust && eps > 0.0
                                        ? Eigen::VectorXd(clf.W.row(1) - clf.W.row(0))
                                        : Eigen::VectorXd()};
  SelectionResult res;
  res.scores.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(labels[i] >= 0 && labels[i] < clf.num_classes(),
            "gradient_norm_select: label out of range");
    Eigen::VectorXd x = pool.row(i);
    if (robust && eps > 0.0) {
      const int y_pm = labels[i] == 1 ? 1 : -1;
      x += worst_case_perturbation(attack_dir, y_pm, eps);
    }
    Eigen::VectorXd p = clf.predict_proba(x);
    p[labels[i]] -= 1.0;
    res.scores[i] = p.norm() * std::sqrt(x.squaredNorm() + 1.0);
  }
  res.indices = detail::per_class_topk(labels, res.scores, k, /*smallest=*/false);
  return res;
}

// Score = Shannon entropy of the predictive distribution; class = predicted
// argmax; keep the k smallest per class.
inline SelectionResult entropy_select(const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                      const LogisticModel& clf, Eigen::Index k) {
  const Eigen::Index n = pool.rows();
  require(n >= 1, "entropy_select: empty pool");
  require(clf.W.cols() == pool.cols(), "entropy_select: dimension mismatch");
  SelectionResult res;
  res.scores.resize(n);
  Eigen::VectorXi pred(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd p = clf.predict_proba(pool.row(i));
    pred[i] = clf.predict(pool.row(i));
    double h = 0.0;
    for (Eigen::Index c = 0; c < p.size(); ++c)
      if (p[c] > 0.0) h -= p[c] * std::log(p[c]);
    res.scores[i] = h;
  }
  res.indices = detail::per_class_topk(pred, res.scores, k, /*smallest=*/true);
  return res;
}

}  // namespace cdlab
