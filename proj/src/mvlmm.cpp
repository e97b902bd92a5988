#include "mvreem/mvlmm.hpp"

#include <cmath>
#include <numbers>

#include "bfgs.hpp"
#include "mvreem/error.hpp"

namespace mvreem {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Row-stacked flattening: entry (j, r) of a J x q matrix goes to j * q + r.
Eigen::VectorXd vec_rows(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v(a.size());
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    for (Eigen::Index r = 0; r < a.cols(); ++r) v(j * a.cols() + r) = a(j, r);
  }
  return v;
}

Eigen::MatrixXd unvec_rows(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < rows; ++j) {
    for (Eigen::Index r = 0; r < cols; ++r) a(j, r) = v(j * cols + r);
  }
  return a;
}

// Any F with D = F F'; D must be symmetric positive semidefinite.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& D) {
  if (D.size() == 0) return D;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
  const double scale = std::max(1.0, std::abs(eig.eigenvalues().maxCoeff()));
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw FitError("random-effect covariance is not positive semidefinite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

std::size_t tri(std::size_t d) { return d * (d + 1) / 2; }

}  // namespace

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

std::string_view to_string(ResidualStructure r) {
  return r == ResidualStructure::diag_by_response ? "diag" : "full";
}

ResidualStructure parse_residual_structure(std::string_view s) {
  if (s == "diag" || s == "diag_by_response") return ResidualStructure::diag_by_response;
  if (s == "full" || s == "full_response_cov") return ResidualStructure::full_response_cov;
  throw ArgumentError("unknown residual structure: " + std::string(s));
}

MixedModelSpec MixedModelSpec::from_leaves(std::span<const std::size_t> leaf, std::size_t leaf_count) {
  if (leaf_count == 0) throw ArgumentError("mixed model needs at least one leaf");
  MixedModelSpec spec;
  spec.leaf.assign(leaf.begin(), leaf.end());
  spec.fixed_design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(leaf.size()),
                                            static_cast<Eigen::Index>(leaf_count));
  for (std::size_t r = 0; r < leaf.size(); ++r) {
    if (leaf[r] >= leaf_count) throw ArgumentError("leaf index out of range");
    spec.fixed_design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(leaf[r])) = 1.0;
  }
  return spec;
}

MixedModelSpec MixedModelSpec::from_design(Eigen::MatrixXd design) {
  MixedModelSpec spec;
  spec.fixed_design = std::move(design);
  return spec;
}

std::optional<std::size_t> FittedMixedModel::object_index(std::string_view id) const {
  for (std::size_t i = 0; i < object_ids.size(); ++i) {
    if (object_ids[i] == id) return i;
  }
  return std::nullopt;
}

MixedLikelihood::MixedLikelihood(const LongitudinalDataset& ds, const MixedModelSpec& spec)
    : ds_(ds),
      spec_(spec),
      J_(ds.responses()),
      p_(spec.fixed_columns()),
      q_(ds.design_columns()),
      re_dim_(spec.random_effects ? ds.responses() * ds.design_columns() : 0) {
  if (static_cast<std::size_t>(spec.fixed_design.rows()) != ds.rows()) {
    throw ArgumentError("fixed-effect design rows do not match the dataset");
  }
  if (ds.objects.empty()) throw ArgumentError("mixed model needs at least one object");
  if (spec.is_leaf_design()) {
    std::vector<std::size_t> counts(p_, 0);
    for (auto l : spec.leaf) ++counts[l];
    for (std::size_t l = 0; l < p_; ++l) {
      if (counts[l] == 0) throw FitError("leaf " + std::to_string(l) + " has no rows");
    }
  }
  stats_.reserve(ds.objects.size());
  for (const auto& o : ds.objects) {
    const auto b = static_cast<Eigen::Index>(o.begin);
    const auto c = static_cast<Eigen::Index>(o.count);
    const auto Yo = ds.Y.middleRows(b, c);
    const auto Xo = spec.fixed_design.middleRows(b, c);
    const auto Zo = ds.Z.middleRows(b, c);
    ObjectStats st;
    st.begin = o.begin;
    st.count = o.count;
    st.ZZ = Zo.transpose() * Zo;
    st.XX = Xo.transpose() * Xo;
    st.XZ = Xo.transpose() * Zo;
    st.YX = Yo.transpose() * Xo;
    st.YZ = Yo.transpose() * Zo;
    stats_.push_back(std::move(st));
  }
}

std::size_t MixedLikelihood::parameter_count() const {
  const std::size_t sigma = spec_.residual == ResidualStructure::diag_by_response ? J_ : tri(J_);
  return tri(re_dim_) + sigma;
}

Eigen::VectorXd MixedLikelihood::pack(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma) const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  if (re_dim_ > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    if (llt.info() != Eigen::Success) throw FitError("pack: D is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index a = 0; a < L.rows(); ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) theta(at++) = a == b ? std::log(L(a, a)) : L(a, b);
    }
  }
  if (spec_.residual == ResidualStructure::diag_by_response) {
    for (Eigen::Index j = 0; j < Sigma.rows(); ++j) theta(at++) = 0.5 * std::log(Sigma(j, j));
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success) throw FitError("pack: Sigma is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index a = 0; a < L.rows(); ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) theta(at++) = a == b ? std::log(L(a, a)) : L(a, b);
    }
  }
  return theta;
}

namespace {

Eigen::MatrixXd lower_from(const Eigen::VectorXd& theta, Eigen::Index& at, Eigen::Index d) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = theta(at++);
      L(a, b) = a == b ? std::exp(v) : v;
    }
  }
  return L;
}

}  // namespace

void MixedLikelihood::unpack(const Eigen::VectorXd& theta, Eigen::MatrixXd& D, Eigen::MatrixXd& Sigma) const {
  Eigen::Index at = 0;
  const auto d = static_cast<Eigen::Index>(re_dim_);
  const Eigen::MatrixXd F = lower_from(theta, at, d);
  D = F * F.transpose();
  const auto J = static_cast<Eigen::Index>(J_);
  if (spec_.residual == ResidualStructure::diag_by_response) {
    Sigma = Eigen::MatrixXd::Zero(J, J);
    for (Eigen::Index j = 0; j < J; ++j) Sigma(j, j) = std::exp(2.0 * theta(at++));
  } else {
    const Eigen::MatrixXd L = lower_from(theta, at, J);
    Sigma = L * L.transpose();
  }
}

double MixedLikelihood::evaluate(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Sigma,
                                 const Eigen::MatrixXd& M, Eigen::MatrixXd* grad_D,
                                 Eigen::MatrixXd* grad_Sigma, std::vector<Eigen::MatrixXd>* blups) const {
  const auto J = static_cast<Eigen::Index>(J_);
  const auto q = static_cast<Eigen::Index>(q_);
  const auto d = static_cast<Eigen::Index>(re_dim_);
  Eigen::LLT<Eigen::MatrixXd> sllt(Sigma);
  if (sllt.info() != Eigen::Success) {
    throw FitError("covariance of object " + ds_.objects.front().id + " is not positive definite");
  }
  const Eigen::MatrixXd Sinv = sllt.solve(Eigen::MatrixXd::Identity(J, J));
  const Eigen::MatrixXd Ls = sllt.matrixL();
  const double logdet_sigma = 2.0 * Ls.diagonal().array().log().sum();

  if (grad_D) *grad_D = Eigen::MatrixXd::Zero(d, d);
  if (grad_Sigma) *grad_Sigma = Eigen::MatrixXd::Zero(J, J);
  if (blups) blups->assign(stats_.size(), Eigen::MatrixXd::Zero(J, q));

  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd R;
  double total = 0.0;
  for (std::size_t o = 0; o < stats_.size(); ++o) {
    const auto& st = stats_[o];
    const auto b = static_cast<Eigen::Index>(st.begin);
    const auto c = static_cast<Eigen::Index>(st.count);
    if (spec_.is_leaf_design()) {
      R.resize(c, J);
      for (Eigen::Index t = 0; t < c; ++t) {
        const auto leaf = static_cast<Eigen::Index>(spec_.leaf[static_cast<std::size_t>(b + t)]);
        R.row(t) = ds_.Y.row(b + t) - M.col(leaf).transpose();
      }
    } else {
      R = ds_.Y.middleRows(b, c) - spec_.fixed_design.middleRows(b, c) * M.transpose();
    }
    const Eigen::MatrixXd S = R.transpose() * R;
    const double n = static_cast<double>(c);
    double minus2 = n * logdet_sigma + Sinv.cwiseProduct(S).sum() + static_cast<double>(J) * n * kLog2Pi;

    if (d > 0) {
      const auto Zo = ds_.Z.middleRows(b, c);
      const Eigen::MatrixXd E = R.transpose() * Zo;
      const Eigen::MatrixXd H = kronecker(Sinv, st.ZZ);
      const Eigen::MatrixXd HF = H * F;
      const Eigen::MatrixXd Mi = Id + F.transpose() * HF;
      Eigen::LLT<Eigen::MatrixXd> mllt(Mi);
      if (mllt.info() != Eigen::Success) {
        throw FitError("covariance of object " + ds_.objects[o].id + " is not positive definite");
      }
      const Eigen::MatrixXd Lm = mllt.matrixL();
      const Eigen::VectorXd h = vec_rows(Sinv * E);
      const Eigen::VectorXd u = F.transpose() * h;
      const Eigen::VectorXd v = mllt.solve(u);
      minus2 += 2.0 * Lm.diagonal().array().log().sum() - u.dot(v);
      const Eigen::VectorXd Fv = F * v;
      if (blups) (*blups)[o] = unvec_rows(Fv, J, q);
      if (grad_D || grad_Sigma) {
        const Eigen::MatrixXd K = F * mllt.solve(F.transpose());
        if (grad_D) {
          const Eigen::MatrixXd zvz = H - H * K * H;
          const Eigen::VectorXd w = h - H * Fv;
          *grad_D += -0.5 * (zvz - w * w.transpose());
        }
        if (grad_Sigma) {
          const Eigen::MatrixXd C = unvec_rows(Fv, J, q);
          Eigen::MatrixXd N(J, J);
          for (Eigen::Index j = 0; j < J; ++j) {
            for (Eigen::Index jj = 0; jj < J; ++jj) {
              N(j, jj) = K.block(j * q, jj * q, q, q).cwiseProduct(st.ZZ).sum();
            }
          }
          const Eigen::MatrixXd vdiag = n * Sinv - Sinv * N * Sinv;
          const Eigen::MatrixXd inner =
              S - E * C.transpose() - C * E.transpose() + C * st.ZZ * C.transpose();
          const Eigen::MatrixXd ww = Sinv * inner * Sinv;
          *grad_Sigma += -0.5 * (vdiag - ww);
        }
      }
    } else if (grad_Sigma) {
      *grad_Sigma += -0.5 * (n * Sinv - Sinv * S * Sinv);
    }
    total += -0.5 * minus2;
  }
  return total;
}

Eigen::MatrixXd MixedLikelihood::gls(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Sigma) const {
  const auto J = static_cast<Eigen::Index>(J_);
  const auto p = static_cast<Eigen::Index>(p_);
  const auto d = static_cast<Eigen::Index>(re_dim_);
  if (d == 0 && spec_.is_leaf_design()) {
    // Ordinary per-leaf means, summed in row order.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(J, p);
    std::vector<double> counts(static_cast<std::size_t>(p), 0.0);
    for (std::size_t r = 0; r < spec_.leaf.size(); ++r) {
      const auto l = static_cast<Eigen::Index>(spec_.leaf[r]);
      sums.col(l) += ds_.Y.row(static_cast<Eigen::Index>(r)).transpose();
      counts[static_cast<std::size_t>(l)] += 1.0;
    }
    for (Eigen::Index l = 0; l < p; ++l) sums.col(l) /= counts[static_cast<std::size_t>(l)];
    return sums;
  }
  Eigen::LLT<Eigen::MatrixXd> sllt(Sigma);
  if (sllt.info() != Eigen::Success) throw FitError("residual covariance is not positive definite");
  const Eigen::MatrixXd Sinv = sllt.solve(Eigen::MatrixXd::Identity(J, J));
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(J * p, J * p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(J * p);
  Eigen::MatrixXd XX = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd YX = Eigen::MatrixXd::Zero(J, p);
  for (const auto& st : stats_) {
    XX += st.XX;
    YX += st.YX;
    if (d == 0) continue;
    const Eigen::MatrixXd H = kronecker(Sinv, st.ZZ);
    Eigen::LLT<Eigen::MatrixXd> mllt(Id + F.transpose() * H * F);
    const Eigen::MatrixXd GF = kronecker(Sinv, st.XZ) * F;
    const Eigen::VectorXd u = F.transpose() * vec_rows(Sinv * st.YZ);
    A.noalias() -= GF * mllt.solve(GF.transpose());
    rhs.noalias() -= GF * mllt.solve(u);
  }
  A += kronecker(Sinv, XX);
  rhs += vec_rows(Sinv * YX);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw FitError("fixed-effect system is singular");
  const Eigen::VectorXd beta = ldlt.solve(rhs);
  if (!beta.allFinite()) throw FitError("fixed-effect system is singular");
  return unvec_rows(beta, J, p);
}

double MixedLikelihood::value(const Eigen::VectorXd& theta, const Eigen::MatrixXd& M, Eigen::VectorXd* grad) const {
  Eigen::Index at = 0;
  const auto d = static_cast<Eigen::Index>(re_dim_);
  const auto J = static_cast<Eigen::Index>(J_);
  const Eigen::MatrixXd F = lower_from(theta, at, d);
  Eigen::MatrixXd Sigma, Ls;
  if (spec_.residual == ResidualStructure::diag_by_response) {
    Sigma = Eigen::MatrixXd::Zero(J, J);
    for (Eigen::Index j = 0; j < J; ++j) Sigma(j, j) = std::exp(2.0 * theta(at + j));
  } else {
    Eigen::Index at2 = at;
    Ls = lower_from(theta, at2, J);
    Sigma = Ls * Ls.transpose();
  }
  Eigen::MatrixXd gD, gS;
  const double ll = evaluate(F, Sigma, M, grad ? &gD : nullptr, grad ? &gS : nullptr, nullptr);
  if (grad) {
    grad->resize(theta.size());
    Eigen::Index k = 0;
    if (d > 0) {
      const Eigen::MatrixXd gF = 2.0 * gD * F;
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) (*grad)(k++) = a == b ? gF(a, a) * F(a, a) : gF(a, b);
      }
    }
    if (spec_.residual == ResidualStructure::diag_by_response) {
      for (Eigen::Index j = 0; j < J; ++j) (*grad)(k++) = gS(j, j) * 2.0 * Sigma(j, j);
    } else {
      const Eigen::MatrixXd gL = 2.0 * gS * Ls;
      for (Eigen::Index a = 0; a < J; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) (*grad)(k++) = a == b ? gL(a, a) * Ls(a, a) : gL(a, b);
      }
    }
  }
  return ll;
}

Eigen::MatrixXd MixedLikelihood::gls_means(const Eigen::VectorXd& theta) const {
  Eigen::Index at = 0;
  const Eigen::MatrixXd F = lower_from(theta, at, static_cast<Eigen::Index>(re_dim_));
  Eigen::MatrixXd D, Sigma;
  unpack(theta, D, Sigma);
  return gls(F, Sigma);
}

double MixedLikelihood::profiled(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* M) const {
  const Eigen::MatrixXd means = gls_means(theta);
  if (M) *M = means;
  return value(theta, means, grad);
}

double log_likelihood(const MixedParameters& params, const LongitudinalDataset& ds, const MixedModelSpec& spec) {
  MixedLikelihood lik(ds, spec);
  const Eigen::MatrixXd F = spec.random_effects ? psd_factor(params.D) : Eigen::MatrixXd(0, 0);
  return lik.evaluate(F, params.Sigma, params.M, nullptr, nullptr, nullptr);
}

std::vector<Eigen::MatrixXd> blup_random_effects(const MixedParameters& params, const LongitudinalDataset& ds,
                                                 const MixedModelSpec& spec) {
  MixedLikelihood lik(ds, spec);
  if (!spec.random_effects) {
    return std::vector<Eigen::MatrixXd>(
        ds.objects.size(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.responses()),
                                                 static_cast<Eigen::Index>(ds.design_columns())));
  }
  std::vector<Eigen::MatrixXd> out;
  lik.evaluate(psd_factor(params.D), params.Sigma, params.M, nullptr, nullptr, &out);
  return out;
}

std::vector<Eigen::MatrixXd> blup_random_effects(const FittedMixedModel& fitted, const LongitudinalDataset& ds,
                                                 const MixedModelSpec& spec) {
  return blup_random_effects(fitted.parameters(), ds, spec);
}

FittedMixedModel fit_mvlmm(const LongitudinalDataset& ds, const MixedModelSpec& spec) {
  MixedLikelihood lik(ds, spec);
  const auto J = static_cast<Eigen::Index>(ds.responses());
  const auto q = static_cast<Eigen::Index>(ds.design_columns());
  FittedMixedModel fit;
  for (const auto& o : ds.objects) fit.object_ids.push_back(o.id);

  // Ordinary fit: leaf means (or OLS) and the residual covariance MLE.
  Eigen::MatrixXd M0;
  if (spec.is_leaf_design()) {
    MixedModelSpec plain = spec;
    plain.random_effects = false;
    M0 = MixedLikelihood(ds, plain).gls(Eigen::MatrixXd(0, 0), Eigen::MatrixXd::Identity(J, J));
  } else {
    const Eigen::MatrixXd& X = spec.fixed_design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(X.transpose() * X);
    M0 = ldlt.solve(X.transpose() * ds.Y).transpose();
    if (!M0.allFinite()) throw FitError("fixed-effect design is rank deficient");
  }
  Eigen::MatrixXd resid(ds.rows(), J);
  for (Eigen::Index r = 0; r < resid.rows(); ++r) {
    resid.row(r) = ds.Y.row(r) - (spec.fixed_design.row(r) * M0.transpose());
  }
  const double n = static_cast<double>(ds.rows());
  Eigen::MatrixXd S0 = resid.transpose() * resid / n;
  if (spec.residual == ResidualStructure::diag_by_response) S0 = Eigen::MatrixXd(S0.diagonal().asDiagonal());
  double scale = 0.0;
  for (Eigen::Index j = 0; j < J; ++j) {
    const double mean = ds.Y.col(j).mean();
    scale = std::max(scale, (ds.Y.col(j).array() - mean).square().sum() / n);
  }
  const double floor = 1e-12 * std::max(scale, 1e-200);

  if (!spec.random_effects) {
    for (Eigen::Index j = 0; j < J; ++j) S0(j, j) = std::max(S0(j, j), floor);
    fit.M = M0;
    fit.Sigma = S0;
    fit.D = Eigen::MatrixXd::Zero(0, 0);
    fit.log_likelihood = log_likelihood(fit.parameters(), ds, spec);
    fit.initial_log_likelihood = fit.log_likelihood;
    fit.trace.push_back(fit.log_likelihood);
    fit.converged = true;
    fit.B.assign(ds.objects.size(), Eigen::MatrixXd::Zero(J, q));
    return fit;
  }

  for (Eigen::Index j = 0; j < J; ++j) S0(j, j) = std::max(S0(j, j), floor);
  if (spec.residual == ResidualStructure::full_response_cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(S0);
    if (llt.info() != Eigen::Success) S0 = Eigen::MatrixXd(S0.diagonal().asDiagonal());
  }
  const auto d = J * q;
  const Eigen::VectorXd theta0 = lik.pack(0.1 * Eigen::MatrixXd::Identity(d, d), S0);
  fit.initial_log_likelihood = lik.profiled(theta0);

  detail::BfgsSettings settings;
  settings.rel_tol = spec.optimizer.rel_tol;
  settings.max_iter = spec.optimizer.max_iter;
  auto objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
    double ll;
    try {
      ll = lik.profiled(theta, &g);
    } catch (const FitError&) {
      return std::numeric_limits<double>::infinity();
    }
    g = -g;
    return -ll;
  };
  const auto res = detail::bfgs_minimize(objective, theta0, settings);
  if (!std::isfinite(res.f)) throw FitError("log-likelihood is not finite at the initial parameters");

  lik.unpack(res.x, fit.D, fit.Sigma);
  fit.M = lik.gls_means(res.x);
  fit.log_likelihood = -res.f;
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.trace.push_back(fit.initial_log_likelihood);
  for (double f : res.trace) fit.trace.push_back(-f);
  fit.B = blup_random_effects(fit, ds, spec);
  return fit;
}

Eigen::VectorXd predict_mixed(const FittedMixedModel& fitted, const Eigen::VectorXd& fixed_row,
                              std::span<const double> z, std::optional<std::string_view> object, bool strict) {
  Eigen::VectorXd out = fitted.M * fixed_row;
  if (!object) return out;
  const auto idx = fitted.object_index(*object);
  if (!idx) {
    if (strict) throw ArgumentError("unknown object id: " + std::string(*object));
    return out;
  }
  const auto& B = fitted.B[*idx];
  if (static_cast<std::size_t>(B.cols()) != z.size()) throw ArgumentError("design vector has wrong length");
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  return out + B * zv;
}

Eigen::VectorXd predict_mixed(const FittedMixedModel& fitted, std::size_t leaf, std::span<const double> z,
                              std::optional<std::string_view> object, bool strict) {
  if (leaf >= static_cast<std::size_t>(fitted.M.cols())) throw ArgumentError("leaf index out of range");
  Eigen::VectorXd out = fitted.M.col(static_cast<Eigen::Index>(leaf));
  if (!object) return out;
  const auto idx = fitted.object_index(*object);
  if (!idx) {
    if (strict) throw ArgumentError("unknown object id: " + std::string(*object));
    return out;
  }
  const auto& B = fitted.B[*idx];
  if (static_cast<std::size_t>(B.cols()) != z.size()) throw ArgumentError("design vector has wrong length");
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  return out + B * zv;
}

}  // namespace mvreem
