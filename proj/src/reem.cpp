#include "mvreem/reem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mvreem/error.hpp"

namespace mvreem {

void ReemOptions::validate() const {
  if (!(tolerance > 0.0)) throw ArgumentError("tolerance must be positive");
  if (max_iterations < 1) throw ArgumentError("max iterations must be at least 1");
  if (folds < 2) throw ArgumentError("folds must be at least 2");
}

std::string_view to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iter: return "max_iter";
    case FitStatus::oscillation_stopped: return "oscillation_stopped";
  }
  return "max_iter";
}

FitStatus parse_fit_status(std::string_view s) {
  if (s == "converged") return FitStatus::converged;
  if (s == "max_iter") return FitStatus::max_iter;
  if (s == "oscillation_stopped") return FitStatus::oscillation_stopped;
  throw ArgumentError("unknown fit status: " + std::string(s));
}

namespace {

Eigen::MatrixXd design_kron(const Eigen::MatrixXd& a, std::size_t q) {
  return kronecker(a, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q)));
}

}  // namespace

std::optional<Eigen::MatrixXd> ReemModel::random_effect(std::string_view object) const {
  const auto idx = mixed.object_index(object);
  if (!idx) return std::nullopt;
  return transform.unwhiten * mixed.B[*idx];
}

Eigen::MatrixXd ReemModel::random_effect_covariance() const {
  const auto J = static_cast<Eigen::Index>(responses());
  const auto q = design_columns();
  if (mixed.D.size() == 0) return Eigen::MatrixXd::Zero(J * static_cast<Eigen::Index>(q), J * static_cast<Eigen::Index>(q));
  const Eigen::MatrixXd A = design_kron(transform.unwhiten, q);
  return A * mixed.D * A.transpose();
}

Eigen::MatrixXd ReemModel::residual_covariance() const {
  return transform.unwhiten * mixed.Sigma * transform.unwhiten.transpose();
}

double pseudo_response(double y, double eta_hat, Family family) {
  check_family_domain(family, y);
  if (family == Family::gaussian_identity) return y;
  const double eta = std::clamp(eta_hat, -30.0, 30.0);
  double d = mean_derivative(family, eta);
  if (std::abs(d) < 1e-6) d = std::copysign(1e-6, d);
  return eta + (y - mean_function(family, eta)) / d;
}

namespace {

struct Iterate {
  MultivariateTree tree;
  FittedMixedModel fitted;
};

/// Y - B_i z_it for every row.
Eigen::MatrixXd adjusted_targets(const LongitudinalDataset& ds, const Eigen::MatrixXd& Y,
                                 const std::vector<Eigen::MatrixXd>& B) {
  Eigen::MatrixXd out = Y;
  if (B.empty()) return out;
  for (std::size_t o = 0; o < ds.objects.size(); ++o) {
    const auto& blk = ds.objects[o];
    for (std::size_t t = 0; t < blk.count; ++t) {
      const auto r = static_cast<Eigen::Index>(blk.begin + t);
      out.row(r) -= (B[o] * ds.Z.row(r).transpose()).transpose();
    }
  }
  return out;
}

MultivariateTree select_step(const LongitudinalDataset& ds, const Eigen::MatrixXd& target,
                             const ReemOptions& opts, Rng& rng, const std::vector<std::size_t>& groups) {
  CvControls cv;
  cv.folds = opts.folds;
  cv.rule = opts.selection;
  cv.object_folds = opts.object_folds;
  return select_by_cv(ds.X, target, cv, opts.grow, rng, groups);
}

std::vector<std::size_t> leaf_membership(const MultivariateTree& tree, const Eigen::MatrixXd& X) {
  std::vector<std::size_t> leaf(static_cast<std::size_t>(X.rows()));
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[static_cast<std::size_t>(c)] = X(r, c);
    leaf[static_cast<std::size_t>(r)] = tree.leaf_index(row);
  }
  return leaf;
}

FittedMixedModel mixed_step(const LongitudinalDataset& ds, const std::vector<std::size_t>& leaf,
                            std::size_t leaves, const ReemOptions& opts) {
  auto spec = MixedModelSpec::from_leaves(leaf, leaves);
  spec.residual = opts.residual;
  spec.random_effects = opts.random_effects;
  spec.optimizer = opts.optimizer;
  return fit_mvlmm(ds, spec);
}

/// Tracks iterates and decides when to stop.
class Monitor {
 public:
  /// Without `comparable`, log-likelihoods of different iterates refer to
  /// different working responses and the oscillation rule is skipped.
  Monitor(const ReemOptions& opts, bool comparable) : opts_(opts), comparable_(comparable) {}

  /// Records an iterate; returns true when the loop should stop.
  bool record(Iterate it, std::vector<ReemIteration>& trace, bool extra_converged = true) {
    const double ll = it.fitted.log_likelihood;
    ReemIteration rec{ll, it.tree.leaf_count(), structure_signature(it.tree)};
    const double previous = trace.empty() ? it.fitted.initial_log_likelihood : trace.back().log_likelihood;
    trace.push_back(rec);
    const bool repeated = seen_.count(rec.structure) > 0;
    seen_.insert(rec.structure);
    if (!best_ || ll > best_->fitted.log_likelihood) {
      best_ = it;
    }
    if (comparable_ && repeated && ll < best_->fitted.log_likelihood) {
      status_ = FitStatus::oscillation_stopped;
      last_ = std::move(it);
      return true;
    }
    last_ = std::move(it);
    if (ll - previous < opts_.tolerance && extra_converged) {
      status_ = FitStatus::converged;
      return true;
    }
    if (static_cast<int>(trace.size()) >= opts_.max_iterations) {
      status_ = FitStatus::max_iter;
      return true;
    }
    return false;
  }

  FitStatus status() const { return status_; }
  /// The iterate reported by the fit.
  const Iterate& result() const { return status_ == FitStatus::oscillation_stopped ? *best_ : *last_; }

 private:
  const ReemOptions& opts_;
  bool comparable_;
  std::set<std::string> seen_;
  std::optional<Iterate> best_;
  std::optional<Iterate> last_;
  FitStatus status_ = FitStatus::max_iter;
};

ReemModel assemble(const LongitudinalDataset& ds, const ReemOptions& opts, const StandardizationTransform& tf,
                   const Iterate& it, std::vector<ReemIteration> trace, FitStatus status) {
  ReemModel model;
  model.options = opts;
  model.response_names = ds.response_names;
  model.predictor_names = ds.predictor_names;
  model.design_names = ds.design_names;
  model.transform = tf;
  model.tree = it.tree;
  model.mixed = it.fitted;
  for (std::size_t l = 0; l < model.tree.leaf_count(); ++l) {
    model.tree.set_leaf_mean(l, tf.inverse(it.fitted.M.col(static_cast<Eigen::Index>(l))));
  }
  model.trace = std::move(trace);
  model.status = status;
  return model;
}

std::vector<std::size_t> fold_groups(const LongitudinalDataset& ds, const ReemOptions& opts) {
  if (!opts.object_folds) return {};
  return ds.row_objects();
}

}  // namespace

ReemModel fit_reem(const LongitudinalDataset& ds, const ReemOptions& opts) {
  opts.validate();
  if (opts.family != Family::gaussian_identity) {
    throw ArgumentError("fit_reem needs the gaussian family; use fit_generalized_reem");
  }
  ds.validate();
  const auto std_data = standardize(ds, opts.standardization);
  const LongitudinalDataset& W = std_data.data;
  const auto groups = fold_groups(W, opts);
  Rng rng(opts.seed);

  std::vector<Eigen::MatrixXd> B;
  std::vector<ReemIteration> trace;
  Monitor monitor(opts, true);
  for (;;) {
    const Eigen::MatrixXd target = adjusted_targets(W, W.Y, B);
    Iterate it;
    it.tree = select_step(W, target, opts, rng, groups);
    const auto leaf = leaf_membership(it.tree, W.X);
    it.fitted = mixed_step(W, leaf, it.tree.leaf_count(), opts);
    B = it.fitted.B;
    if (monitor.record(std::move(it), trace)) break;
  }
  return assemble(ds, opts, std_data.transform, monitor.result(), std::move(trace), monitor.status());
}

ReemModel fit_generalized_reem(const LongitudinalDataset& ds, const ReemOptions& opts) {
  opts.validate();
  ds.validate();
  const Family family = opts.family;
  const bool identity = family == Family::gaussian_identity;
  for (Eigen::Index r = 0; r < ds.Y.rows(); ++r) {
    for (Eigen::Index j = 0; j < ds.Y.cols(); ++j) check_family_domain(family, ds.Y(r, j));
  }
  ReemOptions used = opts;
  if (!identity) used.standardization = Standardization::none;
  const auto std_data = standardize(ds, used.standardization);
  const LongitudinalDataset& base = std_data.data;
  const auto groups = fold_groups(base, used);
  Rng rng(used.seed);

  const auto n = base.Y.rows();
  const auto J = base.Y.cols();
  Eigen::MatrixXd eta = base.Y;
  if (family == Family::bernoulli_logit) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double ybar = base.Y.col(j).mean();
      for (Eigen::Index r = 0; r < n; ++r) eta(r, j) = link_function(family, 0.5 * (base.Y(r, j) + ybar));
    }
  } else if (family == Family::poisson_log) {
    eta = (base.Y.array() + 0.5).log().matrix();
  }
  bool clamped = false;
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < J; ++j) {
      if (std::abs(eta(r, j)) > 30.0) clamped = true;
    }
  }

  LongitudinalDataset work = base;
  auto refresh_pseudo = [&]() {
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index j = 0; j < J; ++j) work.Y(r, j) = pseudo_response(base.Y(r, j), eta(r, j), family);
    }
  };
  refresh_pseudo();

  std::vector<Eigen::MatrixXd> B;
  std::vector<ReemIteration> trace;
  Monitor monitor(used, identity);
  for (;;) {
    const Eigen::MatrixXd target = adjusted_targets(work, work.Y, B);
    Iterate it;
    it.tree = select_step(work, target, used, rng, groups);
    const auto leaf = leaf_membership(it.tree, work.X);
    it.fitted = mixed_step(work, leaf, it.tree.leaf_count(), used);
    B = it.fitted.B;

    // Step (c): linear predictor from leaf means and BLUPs.
    double eta_change = 0.0;
    if (!identity) {
      for (std::size_t o = 0; o < work.objects.size(); ++o) {
        const auto& blk = work.objects[o];
        for (std::size_t t = 0; t < blk.count; ++t) {
          const auto r = static_cast<Eigen::Index>(blk.begin + t);
          Eigen::VectorXd e = it.fitted.M.col(static_cast<Eigen::Index>(leaf[static_cast<std::size_t>(r)]));
          if (!B.empty()) e += B[o] * work.Z.row(r).transpose();
          for (Eigen::Index j = 0; j < J; ++j) {
            double v = e(j);
            if (!(std::abs(v) <= 30.0)) {
              clamped = true;
              v = std::clamp(std::isnan(v) ? 0.0 : v, -30.0, 30.0);
            }
            eta_change = std::max(eta_change, std::abs(v - eta(r, j)));
            eta(r, j) = v;
          }
        }
      }
    }
    // Pseudo-responses move between iterations, so the linear predictor
    // must settle as well before the likelihood rule can stop the loop.
    const bool settled = identity || eta_change < used.tolerance;
    if (monitor.record(std::move(it), trace, settled)) break;
    if (!identity) refresh_pseudo();
  }
  auto model = assemble(ds, used, std_data.transform, monitor.result(), std::move(trace), monitor.status());
  model.eta_clamped = clamped;
  return model;
}

Eigen::VectorXd predict_reem(const ReemModel& model, std::span<const double> x, std::span<const double> z,
                             std::optional<std::string_view> object) {
  if (x.size() != model.predictor_names.size()) {
    throw ArgumentError("predictor vector has " + std::to_string(x.size()) + " entries, expected " +
                        std::to_string(model.predictor_names.size()));
  }
  if (z.size() != model.design_columns()) {
    throw ArgumentError("design vector has " + std::to_string(z.size()) + " entries, expected " +
                        std::to_string(model.design_columns()));
  }
  const std::size_t leaf = model.tree.leaf_index(x);
  return model.transform.inverse(predict_mixed(model.mixed, leaf, z, object, false));
}

Eigen::VectorXd predict_reem_mean(const ReemModel& model, std::span<const double> x, std::span<const double> z,
                                  std::optional<std::string_view> object) {
  Eigen::VectorXd eta = predict_reem(model, x, z, object);
  for (Eigen::Index j = 0; j < eta.size(); ++j) eta(j) = mean_function(model.options.family, eta(j));
  return eta;
}

}  // namespace mvreem
