#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvreem/mrt.hpp"

namespace mvreem {

/// Metrics for one fitted method on one replication.
struct EvaluationReport {
  std::string method;
  double pmse = 0.0;
  double emse_fixed = 0.0;
  std::optional<double> re_pmse;
  std::optional<double> sigma12_emse;
  /// One flag per fitted tree (J flags for uniREEM); empty for linear models.
  std::vector<bool> recovered;
};

/// (1 / (T_test * I)) * sum over rows and responses of squared errors.
/// Rows are (object, test time) pairs; the divisor excludes J.
double pmse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& truth, std::size_t objects,
            std::size_t test_rows_per_object);

/// Same convention as pmse for the population-level part f(X).
double emse_fixed(const Eigen::MatrixXd& fixed_predictions, const Eigen::MatrixXd& true_fixed,
                  std::size_t objects, std::size_t test_rows_per_object);

using ObjectEffects = std::vector<std::pair<std::string, Eigen::MatrixXd>>;

/// Mean over objects and matrix entries of (B_hat - B)^2; objects matched by id.
double re_pmse(const ObjectEffects& estimated, const ObjectEffects& truth);

/// (D_hat(0,1) - sigma12)^2 for a J x J covariance (q = 1).
double sigma12_emse(const Eigen::MatrixXd& D_hat, double sigma12_true);

/// Fraction of trees structurally equal to the truth.
double recovery_rate(const std::vector<const MultivariateTree*>& fitted, const MultivariateTree& truth);

}  // namespace mvreem
