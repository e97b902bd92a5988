#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvreem/data_model.hpp"

namespace mvreem {

enum class ResidualStructure { diag_by_response, full_response_cov };

std::string_view to_string(ResidualStructure r);
ResidualStructure parse_residual_structure(std::string_view s);

struct OptimizerSettings {
  double rel_tol = 1e-8;
  int max_iter = 500;
};

/// Fixed effects plus residual and random-effect structure of a
/// multivariate linear mixed model
///   y_it = M x_it + B_i z_it + e_it,  vec(B_i) ~ N(0, D),  e_it ~ N(0, Sigma).
/// vec() stacks the rows of B_i, so entry (j, r) sits at j * q + r.
struct MixedModelSpec {
  /// n x p fixed-effect design; one-hot rows for leaf membership.
  Eigen::MatrixXd fixed_design;
  /// Leaf of each row when the design is a leaf indicator (else empty).
  std::vector<std::size_t> leaf;
  ResidualStructure residual = ResidualStructure::diag_by_response;
  /// When false D is fixed at zero.
  bool random_effects = true;
  OptimizerSettings optimizer;

  static MixedModelSpec from_leaves(std::span<const std::size_t> leaf, std::size_t leaf_count);
  static MixedModelSpec from_design(Eigen::MatrixXd design);

  std::size_t fixed_columns() const { return static_cast<std::size_t>(fixed_design.cols()); }
  bool is_leaf_design() const { return !leaf.empty(); }
};

struct MixedParameters {
  Eigen::MatrixXd M;      // J x p
  Eigen::MatrixXd D;      // Jq x Jq
  Eigen::MatrixXd Sigma;  // J x J
};

struct FittedMixedModel {
  Eigen::MatrixXd M;
  Eigen::MatrixXd D;
  Eigen::MatrixXd Sigma;
  /// BLUP matrices (J x q) in dataset object order.
  std::vector<Eigen::MatrixXd> B;
  std::vector<std::string> object_ids;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Log-likelihood after every accepted optimizer step.
  std::vector<double> trace;

  std::optional<std::size_t> object_index(std::string_view id) const;
  MixedParameters parameters() const { return {M, D, Sigma}; }
};

/// Exact Gaussian marginal log-likelihood summed over objects.
double log_likelihood(const MixedParameters& params, const LongitudinalDataset& ds,
                      const MixedModelSpec& spec);

/// Maximum-likelihood fit; M is profiled out by generalized least squares.
FittedMixedModel fit_mvlmm(const LongitudinalDataset& ds, const MixedModelSpec& spec);

/// Conditional means vec(B_i) = D Zt_i' V_i^{-1} (y_i - m_i).
std::vector<Eigen::MatrixXd> blup_random_effects(const MixedParameters& params,
                                                 const LongitudinalDataset& ds,
                                                 const MixedModelSpec& spec);
std::vector<Eigen::MatrixXd> blup_random_effects(const FittedMixedModel& fitted,
                                                 const LongitudinalDataset& ds,
                                                 const MixedModelSpec& spec);

/// Fixed part M x plus B_i z for a known object. Unknown objects fall back
/// to the fixed part unless `strict`, which throws.
Eigen::VectorXd predict_mixed(const FittedMixedModel& fitted, const Eigen::VectorXd& fixed_row,
                              std::span<const double> z, std::optional<std::string_view> object,
                              bool strict = false);
Eigen::VectorXd predict_mixed(const FittedMixedModel& fitted, std::size_t leaf,
                              std::span<const double> z, std::optional<std::string_view> object,
                              bool strict = false);

/// Log-likelihood over the unconstrained variance parameterization
/// theta = (log-Cholesky of D, log-Cholesky or log-sd of Sigma), built on
/// per-object sufficient statistics.
class MixedLikelihood {
 public:
  MixedLikelihood(const LongitudinalDataset& ds, const MixedModelSpec& spec);

  std::size_t parameter_count() const;
  Eigen::VectorXd pack(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma) const;
  void unpack(const Eigen::VectorXd& theta, Eigen::MatrixXd& D, Eigen::MatrixXd& Sigma) const;

  /// Log-likelihood at (M, theta); fills the theta-gradient when requested.
  double value(const Eigen::VectorXd& theta, const Eigen::MatrixXd& M, Eigen::VectorXd* grad = nullptr) const;

  /// GLS node means for the variance parameters in theta.
  Eigen::MatrixXd gls_means(const Eigen::VectorXd& theta) const;

  /// Log-likelihood with M profiled out; gradient by the envelope theorem.
  double profiled(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr,
                  Eigen::MatrixXd* M = nullptr) const;

  std::size_t responses() const { return J_; }
  std::size_t design_columns() const { return q_; }

 private:
  struct ObjectStats {
    std::size_t begin = 0;
    std::size_t count = 0;
    Eigen::MatrixXd ZZ;  // q x q
    Eigen::MatrixXd XX;  // p x p
    Eigen::MatrixXd XZ;  // p x q
    Eigen::MatrixXd YX;  // J x p
    Eigen::MatrixXd YZ;  // J x q
  };

  const LongitudinalDataset& ds_;
  const MixedModelSpec& spec_;
  std::size_t J_, p_, q_, re_dim_;
  std::vector<ObjectStats> stats_;

  friend std::vector<Eigen::MatrixXd> blup_random_effects(const MixedParameters&,
                                                          const LongitudinalDataset&,
                                                          const MixedModelSpec&);
  friend double log_likelihood(const MixedParameters&, const LongitudinalDataset&, const MixedModelSpec&);
  friend FittedMixedModel fit_mvlmm(const LongitudinalDataset&, const MixedModelSpec&);

  double evaluate(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Sigma, const Eigen::MatrixXd& M,
                  Eigen::MatrixXd* grad_D, Eigen::MatrixXd* grad_Sigma,
                  std::vector<Eigen::MatrixXd>* blups) const;
  Eigen::MatrixXd gls(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Sigma) const;
};

/// Kronecker product a (x) b.
Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace mvreem
