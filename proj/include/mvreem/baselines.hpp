#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvreem/data_model.hpp"
#include "mvreem/mrt.hpp"
#include "mvreem/mvlmm.hpp"
#include "mvreem/reem.hpp"

namespace mvreem {

/// Common prediction surface of the RE-EM fit and its competitors. All
/// values are on the original response scale.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::size_t responses() const = 0;
  /// Fixed part plus the object's random effect when the object is known.
  virtual Eigen::VectorXd predict(std::span<const double> x, std::span<const double> z,
                                  std::optional<std::string_view> object) const = 0;
  /// J x q random-effect matrix, when the method has one for this object.
  virtual std::optional<Eigen::MatrixXd> random_effect(std::string_view object) const;
  /// Jq x Jq covariance of the random effects, when modelled jointly.
  virtual std::optional<Eigen::MatrixXd> random_effect_covariance() const;
  /// Fitted trees: one for multivariate methods, J for uniREEM, none for
  /// linear models.
  virtual std::vector<const MultivariateTree*> trees() const;
};

enum class BaselineMethod { unilme, multilme, multitree, uniREEM };

std::string_view to_string(BaselineMethod m);
BaselineMethod parse_baseline(std::string_view s);

/// Wraps a fitted RE-EM model.
class ReemPredictor : public Predictor {
 public:
  explicit ReemPredictor(ReemModel model) : model_(std::move(model)) {}
  std::size_t responses() const override { return model_.responses(); }
  Eigen::VectorXd predict(std::span<const double> x, std::span<const double> z,
                          std::optional<std::string_view> object) const override;
  std::optional<Eigen::MatrixXd> random_effect(std::string_view object) const override;
  std::optional<Eigen::MatrixXd> random_effect_covariance() const override;
  std::vector<const MultivariateTree*> trees() const override { return {&model_.tree}; }
  const ReemModel& model() const { return model_; }

 private:
  ReemModel model_;
};

/// Cross-validated multivariate tree with no random effects.
class MultitreePredictor : public Predictor {
 public:
  MultitreePredictor(MultivariateTree tree, std::size_t predictors);
  std::size_t responses() const override { return tree_.responses(); }
  Eigen::VectorXd predict(std::span<const double> x, std::span<const double> z,
                          std::optional<std::string_view> object) const override;
  std::vector<const MultivariateTree*> trees() const override { return {&tree_}; }
  const MultivariateTree& tree() const { return tree_; }

 private:
  MultivariateTree tree_;
  std::size_t predictors_;
};

/// J separate univariate RE-EM trees.
class UniReemPredictor : public Predictor {
 public:
  explicit UniReemPredictor(std::vector<ReemModel> models) : models_(std::move(models)) {}
  std::size_t responses() const override { return models_.size(); }
  Eigen::VectorXd predict(std::span<const double> x, std::span<const double> z,
                          std::optional<std::string_view> object) const override;
  std::optional<Eigen::MatrixXd> random_effect(std::string_view object) const override;
  std::vector<const MultivariateTree*> trees() const override;
  const std::vector<ReemModel>& models() const { return models_; }

 private:
  std::vector<ReemModel> models_;
};

/// Linear fixed effects [1, x] with random effects on z. Missing
/// predictors are replaced by their training column means.
class LinearMixedPredictor : public Predictor {
 public:
  /// One model per response (unilme) or a single joint model (multilme).
  LinearMixedPredictor(std::vector<FittedMixedModel> models, Eigen::VectorXd column_means, bool joint);
  std::size_t responses() const override;
  Eigen::VectorXd predict(std::span<const double> x, std::span<const double> z,
                          std::optional<std::string_view> object) const override;
  std::optional<Eigen::MatrixXd> random_effect(std::string_view object) const override;
  std::optional<Eigen::MatrixXd> random_effect_covariance() const override;
  const std::vector<FittedMixedModel>& models() const { return models_; }

 private:
  Eigen::VectorXd fixed_row(std::span<const double> x) const;

  std::vector<FittedMixedModel> models_;
  Eigen::VectorXd column_means_;
  bool joint_;
};

/// Dense [1, x] design with missing cells imputed by column means.
Eigen::MatrixXd linear_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& column_means);
/// Means of the observed cells of each column (0 for an all-missing column).
Eigen::VectorXd observed_column_means(const Eigen::MatrixXd& X);

/// Fits a competitor. `opts` supplies the seed, CV settings, grow controls,
/// standardization (multitree, uniREEM) and optimizer settings.
std::unique_ptr<Predictor> fit_baseline(const LongitudinalDataset& ds, BaselineMethod method,
                                        const ReemOptions& opts);

MultitreePredictor fit_multitree(const LongitudinalDataset& ds, const ReemOptions& opts);
UniReemPredictor fit_unireem(const LongitudinalDataset& ds, const ReemOptions& opts);
LinearMixedPredictor fit_linear_mixed(const LongitudinalDataset& ds, bool joint, const ReemOptions& opts);

}  // namespace mvreem
