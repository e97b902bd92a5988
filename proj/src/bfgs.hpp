#pragma once

// Quasi-Newton minimizer with Armijo backtracking, shared by the mixed-model
// fits. Internal header.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace mvreem::detail {

struct BfgsSettings {
  double rel_tol = 1e-8;
  double grad_tol = 1e-9;  // relative to 1 + |f|
  int max_iter = 500;
  double max_step = 5.0;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step
};

/// Minimizes f; `fg(x, g)` returns f(x) and writes the gradient into g.
template <class Fn>
BfgsResult bfgs_minimize(Fn&& fg, Eigen::VectorXd x, const BfgsSettings& s) {
  const auto n = x.size();
  BfgsResult res;
  Eigen::VectorXd g(n), gn(n);
  double f = fg(x, g);
  if (!std::isfinite(f)) {
    res.x = x;
    res.f = f;
    return res;
  }
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int stalled = 0;
  for (int it = 0; it < s.max_iter; ++it) {
    res.iterations = it + 1;
    if (n == 0 || g.lpNorm<Eigen::Infinity>() == 0.0) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd d = -hinv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax * t > s.max_step) t = s.max_step / dmax;
    bool accepted = false;
    Eigen::VectorXd xn(n);
    double fn = f;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * d;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No representable descent left along the search direction.
      res.converged = g.lpNorm<Eigen::Infinity>() <= 1e-3 * (1.0 + std::abs(f));
      break;
    }
    const Eigen::VectorXd step = xn - x;
    const Eigen::VectorXd dy = gn - g;
    const double improvement = f - fn;
    x = xn;
    f = fn;
    g = gn;
    res.trace.push_back(f);
    const double sy = step.dot(dy);
    if (sy > 1e-12 * step.norm() * dy.norm()) {
      if (!scaled) {
        hinv *= sy / dy.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      hinv = (I - rho * step * dy.transpose()) * hinv * (I - rho * dy * step.transpose()) +
             rho * step * step.transpose();
    }
    const double scale = 1.0 + std::abs(f);
    if (improvement <= s.rel_tol * scale && g.lpNorm<Eigen::Infinity>() <= s.grad_tol * scale) {
      res.converged = true;
      break;
    }
    // Steps that no longer change f in floating point.
    stalled = improvement <= 1e-13 * scale ? stalled + 1 : 0;
    if (stalled >= 3) {
      res.converged = g.lpNorm<Eigen::Infinity>() <= 1e-3 * scale;
      break;
    }
  }
  res.x = x;
  res.f = f;
  return res;
}

}  // namespace mvreem::detail
