#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvreem/data_model.hpp"
#include "mvreem/mrt.hpp"
#include "mvreem/random.hpp"

namespace mvreem {

enum class Scenario { simple_bivariate, complex_bivariate, five_response, no_random_effect };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view s);
std::size_t scenario_responses(Scenario s);

struct SimulationConfig {
  Scenario scenario = Scenario::simple_bivariate;
  std::size_t objects = 100;   // I
  std::size_t times = 5;       // T_i
  /// Off-diagonal of D: sigma12 for two responses, sigma_B for five.
  double sigma = 0.5;
  double sigma_eps2 = 1.0;
  std::size_t test_times = 20;
  std::uint64_t seed = 1;
  /// Permits values outside the published grids.
  bool off_grid = false;

  /// Throws ArgumentError for invalid or (unless off_grid) off-grid values.
  void validate() const;
};

/// True parameters behind a simulated pair.
struct SimulationTruth {
  MultivariateTree tree;
  Eigen::MatrixXd D;
  Eigen::MatrixXd Sigma;
  /// Object id and its J x 1 random-effect matrix.
  std::vector<std::pair<std::string, Eigen::MatrixXd>> B;
};

struct SimulatedPair {
  LongitudinalDataset train;
  LongitudinalDataset test;
  SimulationTruth truth;
  /// f(X) at every test row.
  Eigen::MatrixXd test_fixed;
};

/// n x 7 predictor block: X1..X5 ~ U(0,10), X6 = round(U(0,10)),
/// X7 two-point on {0, 5.77}.
Eigen::MatrixXd generate_predictors(std::size_t n, Rng& rng);

/// Published tree of a scenario (splits at 5, x <= 5 goes left).
MultivariateTree true_tree(Scenario s);

/// Unit diagonal, constant off-diagonal; zero for the no-random-effect
/// scenario. Throws ArgumentError when the matrix would not be PSD.
Eigen::MatrixXd random_effect_covariance(Scenario s, double sigma);

SimulatedPair generate_pair(const SimulationConfig& cfg, Rng& rng);
SimulatedPair generate_pair(const SimulationConfig& cfg);

}  // namespace mvreem
