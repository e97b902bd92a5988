#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvreem/data_model.hpp"
#include "mvreem/mrt.hpp"
#include "mvreem/mvlmm.hpp"

namespace mvreem {

struct ReemOptions {
  Standardization standardization = Standardization::marg;
  SelectionRule selection = SelectionRule::min;
  std::size_t folds = 10;
  bool object_folds = false;
  /// Stop once the step-(b) log-likelihood increases by less than this.
  double tolerance = 1e-4;
  int max_iterations = 50;
  GrowControls grow;
  Family family = Family::gaussian_identity;
  ResidualStructure residual = ResidualStructure::diag_by_response;
  /// When false D is held at zero.
  bool random_effects = true;
  OptimizerSettings optimizer;
  std::uint64_t seed = 1;

  /// Throws ArgumentError on an invalid combination.
  void validate() const;
};

enum class FitStatus { converged, max_iter, oscillation_stopped };

std::string_view to_string(FitStatus s);
FitStatus parse_fit_status(std::string_view s);

struct ReemIteration {
  double log_likelihood = 0.0;
  std::size_t leaves = 0;
  std::string structure;
};

/// Fitted tree plus mixed model. The mixed model lives on the working
/// (standardized, or link) scale; the tree's leaf means are on the original
/// scale.
struct ReemModel {
  ReemOptions options;
  std::vector<std::string> response_names;
  std::vector<std::string> predictor_names;
  std::vector<std::string> design_names;
  StandardizationTransform transform;
  MultivariateTree tree;
  FittedMixedModel mixed;
  std::vector<ReemIteration> trace;
  FitStatus status = FitStatus::max_iter;
  /// Set when the linear predictor hit the clamp in the generalized path.
  bool eta_clamped = false;

  std::size_t responses() const { return response_names.size(); }
  std::size_t design_columns() const { return design_names.size(); }

  /// Random-effect matrix of an object on the original response scale.
  std::optional<Eigen::MatrixXd> random_effect(std::string_view object) const;
  /// D mapped to the original response scale.
  Eigen::MatrixXd random_effect_covariance() const;
  Eigen::MatrixXd residual_covariance() const;
};

/// Gaussian alternation between tree selection and mixed-model refits.
ReemModel fit_reem(const LongitudinalDataset& ds, const ReemOptions& opts);

/// Pseudo-response loop for any family; the mixed-model step is unweighted.
ReemModel fit_generalized_reem(const LongitudinalDataset& ds, const ReemOptions& opts);

/// Working response eta + (y - h(eta)) / h'(eta), with eta clamped to
/// [-30, 30] and h' floored at 1e-6. The identity link returns y itself.
double pseudo_response(double y, double eta_hat, Family family);

/// Prediction on the original scale (the linear predictor for non-gaussian
/// families). Unknown or absent objects get the fixed part only.
Eigen::VectorXd predict_reem(const ReemModel& model, std::span<const double> x,
                             std::span<const double> z, std::optional<std::string_view> object);

/// predict_reem passed through the mean function.
Eigen::VectorXd predict_reem_mean(const ReemModel& model, std::span<const double> x,
                                  std::span<const double> z, std::optional<std::string_view> object);

}  // namespace mvreem
