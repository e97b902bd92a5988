#include "mvreem/simgen.hpp"

#include <algorithm>
#include <cmath>

#include "mvreem/error.hpp"

namespace mvreem {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::simple_bivariate: return "simple_bivariate";
    case Scenario::complex_bivariate: return "complex_bivariate";
    case Scenario::five_response: return "five_response";
    case Scenario::no_random_effect: return "no_random_effect";
  }
  return "simple_bivariate";
}

Scenario parse_scenario(std::string_view s) {
  if (s == "simple_bivariate" || s == "simple") return Scenario::simple_bivariate;
  if (s == "complex_bivariate" || s == "complex") return Scenario::complex_bivariate;
  if (s == "five_response" || s == "five") return Scenario::five_response;
  if (s == "no_random_effect" || s == "norandom") return Scenario::no_random_effect;
  throw ArgumentError("unknown scenario: " + std::string(s) +
                      " (valid: simple_bivariate, complex_bivariate, five_response, no_random_effect)");
}

std::size_t scenario_responses(Scenario s) { return s == Scenario::five_response ? 5 : 2; }

namespace {

bool in(double v, std::initializer_list<double> grid) {
  return std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(v - g) < 1e-12; });
}

}  // namespace

void SimulationConfig::validate() const {
  if (objects < 1) throw ArgumentError("I must be at least 1");
  if (times < 1) throw ArgumentError("T must be at least 1");
  if (test_times < 1) throw ArgumentError("test rows per object must be at least 1");
  if (!(sigma_eps2 >= 0.0)) throw ArgumentError("sigma_eps2 must be non-negative");
  random_effect_covariance(scenario, sigma);
  if (off_grid) return;
  const auto I = static_cast<double>(objects);
  const auto T = static_cast<double>(times);
  if (!in(I, {50, 100, 200, 400, 800})) throw ArgumentError("I off the published grid {50,100,200,400,800}");
  if (!in(T, {5, 10, 25, 50})) throw ArgumentError("T off the published grid {5,10,25,50}");
  if (scenario != Scenario::no_random_effect && !in(sigma, {0, .25, .5, .75})) {
    throw ArgumentError("sigma off the published grid {0,.25,.5,.75}");
  }
  if (!in(sigma_eps2, {.5, 1, 1.5, 2})) throw ArgumentError("sigma_eps2 off the published grid {.5,1,1.5,2}");
  if (test_times != 20) throw ArgumentError("the published design uses 20 test rows per object");
}

Eigen::MatrixXd generate_predictors(std::size_t n, Rng& rng) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 7);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < 5; ++c) X(r, c) = rng.uniform(0.0, 10.0);
    X(r, 5) = std::round(rng.uniform(0.0, 10.0));
    X(r, 6) = rng.uniform() < 0.5 ? 0.0 : 5.77;
  }
  return X;
}

namespace {

TreeNode split_node(std::size_t predictor, std::size_t depth, std::size_t J) {
  TreeNode n;
  SplitRule s;
  s.predictor = predictor;
  s.threshold = 5.0;
  n.split = s;
  n.depth = depth;
  n.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(J));
  return n;
}

TreeNode leaf_node(std::initializer_list<double> mean, std::size_t depth) {
  TreeNode n;
  n.mean = Eigen::Map<const Eigen::VectorXd>(mean.begin(), static_cast<Eigen::Index>(mean.size()));
  n.depth = depth;
  return n;
}

void link(std::vector<TreeNode>& nodes, int parent, int left, int right) {
  nodes[static_cast<std::size_t>(parent)].left = left;
  nodes[static_cast<std::size_t>(parent)].right = right;
}

/// Four-leaf layout: X1 at the root, X2 on the left, X3 on the right.
MultivariateTree four_leaf(const std::vector<std::initializer_list<double>>& means) {
  const std::size_t J = means.front().size();
  std::vector<TreeNode> nodes{split_node(0, 0, J), split_node(1, 1, J), leaf_node(means[0], 2),
                              leaf_node(means[1], 2), split_node(2, 1, J), leaf_node(means[2], 2),
                              leaf_node(means[3], 2)};
  link(nodes, 0, 1, 4);
  link(nodes, 1, 2, 3);
  link(nodes, 4, 5, 6);
  return MultivariateTree(std::move(nodes), J);
}

}  // namespace

MultivariateTree true_tree(Scenario s) {
  switch (s) {
    case Scenario::simple_bivariate:
    case Scenario::no_random_effect:
      return four_leaf({{10, 6}, {11, 7}, {12, 8}, {13, 9}});
    case Scenario::five_response:
      return four_leaf({{10, 9, 8, 4, 6}, {11, 10, 9, 5, 7}, {12, 11, 10, 6, 8}, {13, 12, 11, 7, 9}});
    case Scenario::complex_bivariate: {
      // Preorder: X1, X2, X4, g1, g2, X5, g3, g4, X3, g5, X6, g6, g7.
      std::vector<TreeNode> nodes{split_node(0, 0, 2), split_node(1, 1, 2),     split_node(3, 2, 2),
                                  leaf_node({6, 4.5}, 3), leaf_node({8, 6.5}, 3), split_node(4, 2, 2),
                                  leaf_node({10, 8.5}, 3), leaf_node({12, 10.5}, 3), split_node(2, 1, 2),
                                  leaf_node({14, 10.5}, 2), split_node(5, 2, 2),  leaf_node({16, 12.5}, 3),
                                  leaf_node({18, 14.5}, 3)};
      link(nodes, 0, 1, 8);
      link(nodes, 1, 2, 5);
      link(nodes, 2, 3, 4);
      link(nodes, 5, 6, 7);
      link(nodes, 8, 9, 10);
      link(nodes, 10, 11, 12);
      return MultivariateTree(std::move(nodes), 2);
    }
  }
  throw ArgumentError("unknown scenario");
}

Eigen::MatrixXd random_effect_covariance(Scenario s, double sigma) {
  const auto J = static_cast<Eigen::Index>(scenario_responses(s));
  if (s == Scenario::no_random_effect) return Eigen::MatrixXd::Zero(J, J);
  const double lo = -1.0 / static_cast<double>(J - 1);
  if (!(sigma >= lo && sigma <= 1.0)) {
    throw ArgumentError("off-diagonal " + std::to_string(sigma) + " makes D indefinite; it must lie in [" +
                        std::to_string(lo) + ", 1]");
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Constant(J, J, sigma);
  D.diagonal().setOnes();
  return D;
}

namespace {

std::string object_id(std::size_t i, std::size_t count) {
  const std::string digits = std::to_string(count);
  std::string s = std::to_string(i + 1);
  return "o" + std::string(digits.size() - std::min(digits.size(), s.size()), '0') + s;
}

LongitudinalDataset make_dataset(const std::vector<std::string>& ids, std::size_t per_object, std::size_t first_time,
                                 const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  LongitudinalDataset ds;
  const auto J = static_cast<std::size_t>(Y.cols());
  for (std::size_t j = 0; j < J; ++j) ds.response_names.push_back("y" + std::to_string(j + 1));
  for (Eigen::Index c = 0; c < X.cols(); ++c) ds.predictor_names.push_back("X" + std::to_string(c + 1));
  ds.design_names = {"(Intercept)"};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ds.objects.push_back({ids[i], i * per_object, per_object});
    for (std::size_t t = 0; t < per_object; ++t) ds.time_labels.push_back(std::to_string(first_time + t));
  }
  ds.X = X;
  ds.Y = Y;
  ds.Z = Eigen::MatrixXd::Ones(X.rows(), 1);
  return ds;
}

}  // namespace

SimulatedPair generate_pair(const SimulationConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto J = static_cast<Eigen::Index>(scenario_responses(cfg.scenario));
  SimulatedPair out;
  out.truth.tree = true_tree(cfg.scenario);
  out.truth.D = random_effect_covariance(cfg.scenario, cfg.sigma);
  out.truth.Sigma = cfg.sigma_eps2 * Eigen::MatrixXd::Identity(J, J);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.truth.D);
  const Eigen::MatrixXd F = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const bool has_re = cfg.scenario != Scenario::no_random_effect;

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < cfg.objects; ++i) {
    ids.push_back(object_id(i, cfg.objects));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(J);
    if (has_re) {
      Eigen::VectorXd u(J);
      for (Eigen::Index j = 0; j < J; ++j) u(j) = rng.normal();
      b = F * u;
    }
    out.truth.B.emplace_back(ids.back(), Eigen::MatrixXd(b));
  }

  const double sd = std::sqrt(cfg.sigma_eps2);
  auto draw = [&](std::size_t per_object, Eigen::MatrixXd& X, Eigen::MatrixXd& Y, Eigen::MatrixXd& fixed) {
    const std::size_t n = per_object * cfg.objects;
    X = generate_predictors(n, rng);
    Y.resize(static_cast<Eigen::Index>(n), J);
    fixed.resize(static_cast<Eigen::Index>(n), J);
    std::vector<double> x(7);
    for (std::size_t r = 0; r < n; ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      for (Eigen::Index c = 0; c < 7; ++c) x[static_cast<std::size_t>(c)] = X(ri, c);
      const Eigen::VectorXd f = predict_tree(out.truth.tree, x);
      fixed.row(ri) = f.transpose();
      const auto& b = out.truth.B[r / per_object].second;
      for (Eigen::Index j = 0; j < J; ++j) Y(ri, j) = f(j) + b(j, 0) + sd * rng.normal();
    }
  };
  Eigen::MatrixXd X, Y, fixed;
  draw(cfg.times, X, Y, fixed);
  out.train = make_dataset(ids, cfg.times, 1, X, Y);
  draw(cfg.test_times, X, Y, fixed);
  out.test = make_dataset(ids, cfg.test_times, cfg.times + 1, X, Y);
  out.test_fixed = fixed;
  return out;
}

SimulatedPair generate_pair(const SimulationConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_pair(cfg, rng);
}

}  // namespace mvreem
