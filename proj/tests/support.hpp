#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mvreem/data_model.hpp"
#include "mvreem/mvlmm.hpp"
#include "mvreem/random.hpp"

namespace testsupport {

inline std::string object_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "g" + std::string(4 - std::min<std::size_t>(4, s.size()), '0') + s;
}

/// Balanced panel with uniform predictors, a random-intercept-and-slope
/// design when q = 2, and Gaussian responses around a step function.
inline mvreem::LongitudinalDataset random_panel(mvreem::Rng& rng, std::size_t objects, std::size_t times,
                                                std::size_t J, std::size_t k, std::size_t q) {
  std::vector<std::string> rn, pn, dn;
  for (std::size_t j = 0; j < J; ++j) rn.push_back("r" + std::to_string(j));
  for (std::size_t c = 0; c < k; ++c) pn.push_back("p" + std::to_string(c));
  dn.push_back("(Intercept)");
  if (q > 1) dn.push_back("slope");
  mvreem::DatasetBuilder b(rn, pn, dn);
  for (std::size_t i = 0; i < objects; ++i) {
    std::vector<double> shift(J);
    for (auto& s : shift) s = rng.normal();
    for (std::size_t t = 0; t < times; ++t) {
      std::vector<double> x(k), y(J), z(q);
      for (auto& v : x) v = rng.uniform(0, 10);
      z[0] = 1.0;
      if (q > 1) z[1] = static_cast<double>(t) / static_cast<double>(times);
      for (std::size_t j = 0; j < J; ++j) {
        y[j] = (k > 0 && x[0] > 5 ? 2.0 : 0.0) + static_cast<double>(j) + shift[j] + 0.7 * rng.normal();
      }
      b.add_row(object_name(i), std::to_string(t), static_cast<double>(t), y, x, z);
    }
  }
  return std::move(b).build();
}

/// Marginal Gaussian log-likelihood from the full per-object covariance,
/// V_i = A_i D A_i' + I (x) Sigma with A_it = I_J (x) z_it'.
inline double dense_log_likelihood(const mvreem::MixedParameters& p, const mvreem::LongitudinalDataset& ds,
                                   const Eigen::MatrixXd& design) {
  const auto J = ds.Y.cols();
  const auto q = ds.Z.cols();
  double ll = 0.0;
  for (const auto& blk : ds.objects) {
    const auto n = static_cast<Eigen::Index>(blk.count);
    Eigen::VectorXd r(n * J);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n * J, J * q);
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto row = static_cast<Eigen::Index>(blk.begin) + t;
      const Eigen::VectorXd mean = p.M * design.row(row).transpose();
      for (Eigen::Index j = 0; j < J; ++j) {
        r(t * J + j) = ds.Y(row, j) - mean(j);
        for (Eigen::Index c = 0; c < q; ++c) A(t * J + j, j * q + c) = ds.Z(row, c);
      }
    }
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n * J, n * J);
    if (p.D.size() > 0) V = A * p.D * A.transpose();
    for (Eigen::Index t = 0; t < n; ++t) V.block(t * J, t * J, J, J) += p.Sigma;
    const Eigen::LLT<Eigen::MatrixXd> llt(V);
    const Eigen::MatrixXd L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
    ll -= 0.5 * (static_cast<double>(n * J) * std::log(2.0 * std::numbers::pi) + logdet + r.dot(llt.solve(r)));
  }
  return ll;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, lo + spread].
inline Eigen::MatrixXd random_spd(mvreem::Rng& rng, Eigen::Index d, double lo = 0.2, double spread = 1.5) {
  Eigen::MatrixXd G(d, d);
  for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd ev(d);
  for (Eigen::Index i = 0; i < d; ++i) ev(i) = lo + spread * rng.uniform();
  return Q * ev.asDiagonal() * Q.transpose();
}

}  // namespace testsupport
