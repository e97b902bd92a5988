#include "mvreem/baselines.hpp"

#include "mvreem/error.hpp"

namespace mvreem {

std::optional<Eigen::MatrixXd> Predictor::random_effect(std::string_view) const { return std::nullopt; }
std::optional<Eigen::MatrixXd> Predictor::random_effect_covariance() const { return std::nullopt; }
std::vector<const MultivariateTree*> Predictor::trees() const { return {}; }

std::string_view to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::unilme: return "unilme";
    case BaselineMethod::multilme: return "multilme";
    case BaselineMethod::multitree: return "multitree";
    case BaselineMethod::uniREEM: return "uniREEM";
  }
  return "unilme";
}

BaselineMethod parse_baseline(std::string_view s) {
  if (s == "unilme") return BaselineMethod::unilme;
  if (s == "multilme") return BaselineMethod::multilme;
  if (s == "multitree") return BaselineMethod::multitree;
  if (s == "uniREEM") return BaselineMethod::uniREEM;
  throw ArgumentError("unknown baseline method: " + std::string(s));
}

Eigen::VectorXd ReemPredictor::predict(std::span<const double> x, std::span<const double> z,
                                       std::optional<std::string_view> object) const {
  return predict_reem(model_, x, z, object);
}

std::optional<Eigen::MatrixXd> ReemPredictor::random_effect(std::string_view object) const {
  if (!model_.options.random_effects) return std::nullopt;
  return model_.random_effect(object);
}

std::optional<Eigen::MatrixXd> ReemPredictor::random_effect_covariance() const {
  if (!model_.options.random_effects) return std::nullopt;
  return model_.random_effect_covariance();
}

MultitreePredictor::MultitreePredictor(MultivariateTree tree, std::size_t predictors)
    : tree_(std::move(tree)), predictors_(predictors) {}

Eigen::VectorXd MultitreePredictor::predict(std::span<const double> x, std::span<const double>,
                                            std::optional<std::string_view>) const {
  if (x.size() != predictors_) throw ArgumentError("predictor vector has the wrong length");
  return predict_tree(tree_, x);
}

Eigen::VectorXd UniReemPredictor::predict(std::span<const double> x, std::span<const double> z,
                                          std::optional<std::string_view> object) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(models_.size()));
  for (std::size_t j = 0; j < models_.size(); ++j) {
    out(static_cast<Eigen::Index>(j)) = predict_reem(models_[j], x, z, object)(0);
  }
  return out;
}

std::optional<Eigen::MatrixXd> UniReemPredictor::random_effect(std::string_view object) const {
  if (models_.empty()) return std::nullopt;
  const auto q = static_cast<Eigen::Index>(models_.front().design_columns());
  Eigen::MatrixXd B(static_cast<Eigen::Index>(models_.size()), q);
  for (std::size_t j = 0; j < models_.size(); ++j) {
    const auto b = models_[j].random_effect(object);
    if (!b) return std::nullopt;
    B.row(static_cast<Eigen::Index>(j)) = b->row(0);
  }
  return B;
}

std::vector<const MultivariateTree*> UniReemPredictor::trees() const {
  std::vector<const MultivariateTree*> out;
  for (const auto& m : models_) out.push_back(&m.tree);
  return out;
}

LinearMixedPredictor::LinearMixedPredictor(std::vector<FittedMixedModel> models, Eigen::VectorXd column_means,
                                           bool joint)
    : models_(std::move(models)), column_means_(std::move(column_means)), joint_(joint) {}

std::size_t LinearMixedPredictor::responses() const {
  return joint_ ? static_cast<std::size_t>(models_.front().M.rows()) : models_.size();
}

Eigen::VectorXd LinearMixedPredictor::fixed_row(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(column_means_.size())) {
    throw ArgumentError("predictor vector has the wrong length");
  }
  Eigen::VectorXd row(column_means_.size() + 1);
  row(0) = 1.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    row(static_cast<Eigen::Index>(c) + 1) = is_missing(x[c]) ? column_means_(static_cast<Eigen::Index>(c)) : x[c];
  }
  return row;
}

Eigen::VectorXd LinearMixedPredictor::predict(std::span<const double> x, std::span<const double> z,
                                              std::optional<std::string_view> object) const {
  const Eigen::VectorXd row = fixed_row(x);
  if (joint_) return predict_mixed(models_.front(), row, z, object);
  Eigen::VectorXd out(static_cast<Eigen::Index>(models_.size()));
  for (std::size_t j = 0; j < models_.size(); ++j) {
    out(static_cast<Eigen::Index>(j)) = predict_mixed(models_[j], row, z, object)(0);
  }
  return out;
}

std::optional<Eigen::MatrixXd> LinearMixedPredictor::random_effect(std::string_view object) const {
  if (joint_) {
    const auto idx = models_.front().object_index(object);
    if (!idx) return std::nullopt;
    return models_.front().B[*idx];
  }
  const auto q = models_.front().B.empty() ? 0 : models_.front().B.front().cols();
  Eigen::MatrixXd B(static_cast<Eigen::Index>(models_.size()), q);
  for (std::size_t j = 0; j < models_.size(); ++j) {
    const auto idx = models_[j].object_index(object);
    if (!idx) return std::nullopt;
    B.row(static_cast<Eigen::Index>(j)) = models_[j].B[*idx].row(0);
  }
  return B;
}

std::optional<Eigen::MatrixXd> LinearMixedPredictor::random_effect_covariance() const {
  if (!joint_) return std::nullopt;
  return models_.front().D;
}

Eigen::VectorXd observed_column_means(const Eigen::MatrixXd& X) {
  Eigen::VectorXd means = Eigen::VectorXd::Zero(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      if (is_missing(X(r, c))) continue;
      sum += X(r, c);
      ++n;
    }
    if (n > 0) means(c) = sum / static_cast<double>(n);
  }
  return means;
}

Eigen::MatrixXd linear_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& column_means) {
  Eigen::MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) D(r, c + 1) = is_missing(X(r, c)) ? column_means(c) : X(r, c);
  }
  return D;
}

MultitreePredictor fit_multitree(const LongitudinalDataset& ds, const ReemOptions& opts) {
  opts.validate();
  const auto std_data = standardize(ds, opts.standardization);
  const auto& W = std_data.data;
  CvControls cv;
  cv.folds = opts.folds;
  cv.rule = opts.selection;
  cv.object_folds = opts.object_folds;
  Rng rng(opts.seed);
  const auto groups = opts.object_folds ? W.row_objects() : std::vector<std::size_t>{};
  MultivariateTree tree = select_by_cv(W.X, W.Y, cv, opts.grow, rng, groups);
  for (std::size_t l = 0; l < tree.leaf_count(); ++l) {
    const auto& node = tree.nodes()[static_cast<std::size_t>(tree.leaf_nodes()[l])];
    tree.set_leaf_mean(l, std_data.transform.inverse(node.mean));
  }
  return MultitreePredictor(std::move(tree), ds.predictors());
}

UniReemPredictor fit_unireem(const LongitudinalDataset& ds, const ReemOptions& opts) {
  std::vector<ReemModel> models;
  for (std::size_t j = 0; j < ds.responses(); ++j) {
    ReemOptions o = opts;
    o.seed = opts.seed + j;
    models.push_back(fit_reem(ds.with_response(j), o));
  }
  return UniReemPredictor(std::move(models));
}

LinearMixedPredictor fit_linear_mixed(const LongitudinalDataset& ds, bool joint, const ReemOptions& opts) {
  ds.validate();
  const Eigen::VectorXd means = observed_column_means(ds.X);
  std::vector<FittedMixedModel> models;
  auto fit_one = [&](const LongitudinalDataset& d) {
    auto spec = MixedModelSpec::from_design(linear_design(d.X, means));
    spec.residual = opts.residual;
    spec.random_effects = opts.random_effects;
    spec.optimizer = opts.optimizer;
    models.push_back(fit_mvlmm(d, spec));
  };
  if (joint) {
    fit_one(ds);
  } else {
    for (std::size_t j = 0; j < ds.responses(); ++j) fit_one(ds.with_response(j));
  }
  return LinearMixedPredictor(std::move(models), means, joint);
}

std::unique_ptr<Predictor> fit_baseline(const LongitudinalDataset& ds, BaselineMethod method,
                                        const ReemOptions& opts) {
  switch (method) {
    case BaselineMethod::unilme:
      return std::make_unique<LinearMixedPredictor>(fit_linear_mixed(ds, false, opts));
    case BaselineMethod::multilme:
      return std::make_unique<LinearMixedPredictor>(fit_linear_mixed(ds, true, opts));
    case BaselineMethod::multitree:
      return std::make_unique<MultitreePredictor>(fit_multitree(ds, opts));
    case BaselineMethod::uniREEM:
      return std::make_unique<UniReemPredictor>(fit_unireem(ds, opts));
  }
  throw ArgumentError("unknown baseline method");
}

}  // namespace mvreem
