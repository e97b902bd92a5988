#pragma once

// Brute-force references used by unit and acceptance tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "mvreem/data_model.hpp"
#include "mvreem/mrt.hpp"
#include "mvreem/random.hpp"

namespace oracle {

/// Two-pass sum of squared distances to the centroid.
inline double impurity(const Eigen::MatrixXd& Y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(Y.cols());
  for (auto r : rows) mean += Y.row(static_cast<Eigen::Index>(r)).transpose();
  mean /= static_cast<double>(rows.size());
  double s = 0.0;
  for (auto r : rows) s += (Y.row(static_cast<Eigen::Index>(r)).transpose() - mean).squaredNorm();
  return s;
}

inline double split_midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

struct Split {
  std::size_t predictor;
  double threshold;
  double gain;
};

/// Tries every (predictor, threshold between distinct observed values) pair.
/// Ties within kGainTieTolerance * parent impurity go to the lowest
/// predictor index, then the lowest threshold.
inline std::optional<Split> exhaustive_split(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                             const std::vector<std::size_t>& rows,
                                             const mvreem::GrowControls& c, double root_impurity) {
  if (rows.size() < 2 || rows.size() < c.minsplit) return std::nullopt;
  const std::size_t minbucket = std::max<std::size_t>(c.minbucket, 1);
  const double tol = mvreem::kGainTieTolerance * impurity(Y, rows);
  std::vector<Split> all;
  for (Eigen::Index p = 0; p < X.cols(); ++p) {
    std::vector<std::size_t> observed;
    std::set<double> values;
    for (auto r : rows) {
      const double v = X(static_cast<Eigen::Index>(r), p);
      if (mvreem::is_missing(v)) continue;
      observed.push_back(r);
      values.insert(v);
    }
    const double whole = impurity(Y, observed);
    for (auto it = values.begin(); it != values.end(); ++it) {
      const auto next = std::next(it);
      if (next == values.end()) break;
      const double thr = split_midpoint(*it, *next);
      std::vector<std::size_t> left, right;
      for (auto r : observed) (X(static_cast<Eigen::Index>(r), p) <= thr ? left : right).push_back(r);
      if (left.size() < minbucket || right.size() < minbucket) continue;
      all.push_back({static_cast<std::size_t>(p), thr, whole - impurity(Y, left) - impurity(Y, right)});
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : all) best = std::max(best, s.gain);
  if (!(best > c.cp * root_impurity) || !(best > tol)) return std::nullopt;
  for (const auto& s : all) {
    if (s.gain >= best - tol) return s;  // `all` is in (predictor, threshold) order
  }
  return std::nullopt;
}

struct SplitCase {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  std::vector<std::size_t> rows;
  mvreem::GrowControls controls;
  double root_impurity = 0.0;
};

/// Small random node: coarse predictor values and sometimes integer
/// responses so that threshold and gain ties are common.
inline SplitCase random_split_case(mvreem::Rng& rng) {
  SplitCase sc;
  const auto n = static_cast<Eigen::Index>(2 + rng.below(49));
  const auto k = static_cast<Eigen::Index>(1 + rng.below(4));
  const auto J = static_cast<Eigen::Index>(1 + rng.below(3));
  const bool coarse_y = rng.uniform() < 0.4;
  const double missing_rate = rng.uniform() < 0.3 ? 0.15 : 0.0;
  sc.X.resize(n, k);
  sc.Y.resize(n, J);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index p = 0; p < k; ++p) {
      const bool coarse = (p % 2) == 0;
      double v = coarse ? static_cast<double>(rng.below(6)) : rng.uniform(-3, 3);
      if (rng.uniform() < missing_rate) v = mvreem::kMissing;
      sc.X(i, p) = v;
    }
    for (Eigen::Index j = 0; j < J; ++j) {
      sc.Y(i, j) = coarse_y ? static_cast<double>(rng.below(3)) : rng.normal() + (sc.X(i, 0) > 2 ? 1.0 : 0.0);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) sc.rows.push_back(static_cast<std::size_t>(i));
  sc.controls.minsplit = 2 + rng.below(8);
  sc.controls.minbucket = 1 + rng.below(5);
  sc.controls.cp = rng.uniform() < 0.5 ? 0.0 : 0.01;
  sc.root_impurity = impurity(sc.Y, sc.rows);
  return sc;
}

/// Closed-form ML estimates of the balanced one-way random-intercept model
/// y_it = mu + b_i + e_it.
struct OneWay {
  double mu = 0.0;
  double sigma2 = 0.0;
  double tau2 = 0.0;
  std::vector<double> group_means;

  double shrinkage(double T) const { return tau2 / (tau2 + sigma2 / T); }
  double blup(std::size_t i, double T) const { return shrinkage(T) * (group_means[i] - mu); }
};

inline OneWay one_way_ml(const Eigen::MatrixXd& y /* I x T */) {
  OneWay ow;
  const auto I = static_cast<double>(y.rows());
  const auto T = static_cast<double>(y.cols());
  ow.mu = y.mean();
  double ssw = 0.0, ssb = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double m = y.row(i).mean();
    ow.group_means.push_back(m);
    ssb += T * (m - ow.mu) * (m - ow.mu);
    for (Eigen::Index t = 0; t < y.cols(); ++t) ssw += (y(i, t) - m) * (y(i, t) - m);
  }
  ow.sigma2 = ssw / (I * (T - 1.0));
  ow.tau2 = ssb / (I * T) - ow.sigma2 / T;
  if (ow.tau2 < 0.0) {
    // maximum on the boundary tau2 = 0: pooled variance about the grand mean
    ow.tau2 = 0.0;
    ow.sigma2 = (ssw + ssb) / (I * T);
  }
  return ow;
}

}  // namespace oracle
