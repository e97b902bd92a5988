#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvreem/random.hpp"

namespace mvreem {

/// Stopping rules for tree growth.
struct GrowControls {
  std::size_t minsplit = 20;
  std::size_t minbucket = 7;
  double cp = 0.01;
  std::size_t maxdepth = 30;
  std::size_t max_surrogates = 5;
};

/// Backup rule used when the primary predictor is missing.
struct SurrogateRule {
  std::size_t predictor = 0;
  double threshold = 0.0;
  double agreement = 0.0;
  /// Whether x <= threshold sends the row left.
  bool left_when_le = true;
};

/// Primary split: x[predictor] <= threshold goes left.
struct SplitRule {
  std::size_t predictor = 0;
  double threshold = 0.0;
  std::vector<SurrogateRule> surrogates;  // decreasing agreement
  bool majority_left = true;

  bool goes_left(std::span<const double> x) const;
};

struct TreeNode {
  std::optional<SplitRule> split;
  int left = -1;
  int right = -1;
  Eigen::VectorXd mean;
  std::size_t count = 0;
  double impurity = 0.0;
  std::size_t depth = 0;

  bool is_leaf() const { return !split.has_value(); }
};

/// Binary tree stored in preorder; node 0 is the root. Leaves are numbered
/// 0..L-1 in preorder, which is the column order of leaf-mean matrices.
class MultivariateTree {
 public:
  MultivariateTree() = default;
  MultivariateTree(std::vector<TreeNode> nodes, std::size_t responses);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t responses() const { return responses_; }
  std::size_t leaf_count() const { return leaf_nodes_.size(); }
  /// Node indices of the leaves in preorder.
  const std::vector<int>& leaf_nodes() const { return leaf_nodes_; }
  /// Leaf number of a node, or -1 for internal nodes.
  int leaf_number(int node) const { return leaf_number_[static_cast<std::size_t>(node)]; }

  /// Node reached by routing x (with surrogates for missing entries).
  int route(std::span<const double> x) const;
  std::size_t leaf_index(std::span<const double> x) const;

  /// Replaces the mean vector of leaf `leaf`.
  void set_leaf_mean(std::size_t leaf, const Eigen::VectorXd& mean);

  std::vector<double> complexity_trace;

 private:
  void index_leaves();

  std::vector<TreeNode> nodes_;
  std::size_t responses_ = 0;
  std::vector<int> leaf_nodes_;
  std::vector<int> leaf_number_;
};

/// Sum over rows of the squared Euclidean distance to the centroid.
double node_impurity(const Eigen::MatrixXd& Y, std::span<const std::size_t> rows);
double node_impurity(const Eigen::MatrixXd& Y);

struct SplitCandidate {
  std::size_t predictor = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Relative tolerance under which two split gains count as tied.
inline constexpr double kGainTieTolerance = 1e-10;

/// Best admissible split of the node holding `rows`, or nothing when no
/// split decreases impurity by more than cp * root_impurity.
std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                         std::span<const std::size_t> rows,
                                         const GrowControls& controls, double root_impurity);

MultivariateTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const GrowControls& controls);
MultivariateTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           std::span<const std::size_t> rows, const GrowControls& controls);

/// One element of the weakest-link sequence.
struct PruneStep {
  double alpha = 0.0;
  /// Per node of the full tree: true when the node is a leaf of this subtree.
  std::vector<char> collapsed;
  std::size_t leaves = 0;
  double impurity = 0.0;
};

/// Nested subtrees from the full tree (alpha = 0) to the root-only tree.
struct ComplexityPath {
  std::vector<PruneStep> steps;

  /// Step optimal at penalty alpha: the last step whose alpha <= alpha.
  const PruneStep& at(double alpha) const;
};

ComplexityPath cost_complexity_path(const MultivariateTree& tree);

/// Materializes the subtree whose leaves are given by `collapsed`.
MultivariateTree prune(const MultivariateTree& tree, const std::vector<char>& collapsed);

enum class SelectionRule { min, one_se };

std::string_view to_string(SelectionRule r);
SelectionRule parse_selection(std::string_view s);

struct CvControls {
  std::size_t folds = 10;
  SelectionRule rule = SelectionRule::min;
  /// Assign folds by object instead of by observation.
  bool object_folds = false;
};

/// Cross-validation table of the full-data complexity path.
struct CvTable {
  std::vector<double> alpha;
  std::vector<std::size_t> leaves;
  std::vector<double> error;
  std::vector<double> std_error;
  std::size_t chosen = 0;
};

/// Grows a full tree and picks a pruned subtree by k-fold cross-validation.
/// `groups` (one id per row) is only consulted when object_folds is set.
MultivariateTree select_by_cv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                              const CvControls& cv, const GrowControls& controls, Rng& rng,
                              std::span<const std::size_t> groups = {}, CvTable* table = nullptr);

Eigen::VectorXd predict_tree(const MultivariateTree& tree, std::span<const double> x);

/// Same shape and same split predictors at every internal node.
bool structure_equal(const MultivariateTree& a, const MultivariateTree& b);

/// Compact preorder signature of the shape and split predictors.
std::string structure_signature(const MultivariateTree& tree);

}  // namespace mvreem
