#include "mvreem/mrt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvreem/data_model.hpp"
#include "mvreem/error.hpp"
#include "mvreem/simd/kernels.hpp"

namespace mvreem {
namespace {

template <class Getter>
bool route_left(const SplitRule& rule, Getter&& x) {
  const double v = x(rule.predictor);
  if (!is_missing(v)) return v <= rule.threshold;
  for (const auto& s : rule.surrogates) {
    const double w = x(s.predictor);
    if (!is_missing(w)) return (w <= s.threshold) == s.left_when_le;
  }
  return rule.majority_left;
}

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

Eigen::VectorXd rows_mean(const Eigen::MatrixXd& Y, std::span<const std::size_t> rows) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(Y.cols());
  for (auto r : rows) sum += Y.row(static_cast<Eigen::Index>(r)).transpose();
  return sum / static_cast<double>(rows.size());
}

std::vector<SurrogateRule> find_surrogates(const Eigen::MatrixXd& X, std::span<const std::size_t> rows,
                                           const SplitRule& primary, std::size_t max_surrogates) {
  std::vector<SurrogateRule> out;
  const auto k = static_cast<std::size_t>(X.cols());
  std::vector<std::pair<double, char>> pairs;
  for (std::size_t q = 0; q < k; ++q) {
    if (q == primary.predictor) continue;
    pairs.clear();
    for (auto r : rows) {
      const auto ri = static_cast<Eigen::Index>(r);
      const double xp = X(ri, static_cast<Eigen::Index>(primary.predictor));
      const double xq = X(ri, static_cast<Eigen::Index>(q));
      if (is_missing(xp) || is_missing(xq)) continue;
      pairs.emplace_back(xq, static_cast<char>(xp <= primary.threshold));
    }
    const std::size_t m = pairs.size();
    if (m < 2) continue;
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t total_left = 0;
    for (const auto& p : pairs) total_left += static_cast<std::size_t>(p.second);
    const std::size_t baseline = std::max(total_left, m - total_left);
    std::size_t best = 0;
    double best_threshold = 0.0;
    bool best_dir = true;
    std::size_t prefix_left = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      prefix_left += static_cast<std::size_t>(pairs[i].second);
      if (!(pairs[i].first < pairs[i + 1].first)) continue;
      const std::size_t suffix_right = (m - i - 1) - (total_left - prefix_left);
      const std::size_t agree = prefix_left + suffix_right;
      if (agree > best) {
        best = agree;
        best_threshold = midpoint(pairs[i].first, pairs[i + 1].first);
        best_dir = true;
      }
      if (m - agree > best) {
        best = m - agree;
        best_threshold = midpoint(pairs[i].first, pairs[i + 1].first);
        best_dir = false;
      }
    }
    if (best > baseline) {
      out.push_back({q, best_threshold, static_cast<double>(best) / static_cast<double>(m), best_dir});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const SurrogateRule& a, const SurrogateRule& b) {
    if (a.agreement != b.agreement) return a.agreement > b.agreement;
    return a.predictor < b.predictor;
  });
  if (out.size() > max_surrogates) out.resize(max_surrogates);
  return out;
}

class Grower {
 public:
  Grower(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const GrowControls& controls)
      : X_(X), Y_(Y), controls_(controls) {}

  MultivariateTree run(std::vector<std::size_t> rows) {
    if (rows.empty()) throw ArgumentError("grow_tree: no rows");
    root_impurity_ = node_impurity(Y_, rows);
    build(std::move(rows), 0);
    return MultivariateTree(std::move(nodes_), static_cast<std::size_t>(Y_.cols()));
  }

 private:
  int build(std::vector<std::size_t> rows, std::size_t depth) {
    const int idx = static_cast<int>(nodes_.size());
    {
      TreeNode node;
      node.mean = rows_mean(Y_, rows);
      node.count = rows.size();
      node.impurity = node_impurity(Y_, rows);
      node.depth = depth;
      nodes_.push_back(std::move(node));
    }
    if (rows.size() < controls_.minsplit || depth >= controls_.maxdepth || !(nodes_[idx].impurity > 0.0)) {
      return idx;
    }
    const auto cand = best_split(X_, Y_, rows, controls_, root_impurity_);
    if (!cand) return idx;
    SplitRule rule;
    rule.predictor = cand->predictor;
    rule.threshold = cand->threshold;
    std::size_t observed_left = 0, observed_right = 0;
    for (auto r : rows) {
      const double v = X_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(rule.predictor));
      if (is_missing(v)) continue;
      (v <= rule.threshold ? observed_left : observed_right) += 1;
    }
    rule.majority_left = observed_left >= observed_right;
    rule.surrogates = find_surrogates(X_, rows, rule, controls_.max_surrogates);

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      const auto ri = static_cast<Eigen::Index>(r);
      const bool left = route_left(rule, [&](std::size_t p) { return X_(ri, static_cast<Eigen::Index>(p)); });
      (left ? left_rows : right_rows).push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return idx;
    rows.clear();
    rows.shrink_to_fit();
    nodes_[idx].split = std::move(rule);
    const int l = build(std::move(left_rows), depth + 1);
    nodes_[idx].left = l;
    const int r = build(std::move(right_rows), depth + 1);
    nodes_[idx].right = r;
    return idx;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::MatrixXd& Y_;
  GrowControls controls_;
  double root_impurity_ = 0.0;
  std::vector<TreeNode> nodes_;
};

}  // namespace

bool SplitRule::goes_left(std::span<const double> x) const {
  return route_left(*this, [&](std::size_t p) { return x[p]; });
}

MultivariateTree::MultivariateTree(std::vector<TreeNode> nodes, std::size_t responses)
    : nodes_(std::move(nodes)), responses_(responses) {
  index_leaves();
}

void MultivariateTree::index_leaves() {
  leaf_nodes_.clear();
  leaf_number_.assign(nodes_.size(), -1);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) {
      leaf_number_[i] = static_cast<int>(leaf_nodes_.size());
      leaf_nodes_.push_back(static_cast<int>(i));
    }
  }
}

int MultivariateTree::route(std::span<const double> x) const {
  if (nodes_.empty()) throw ArgumentError("route: empty tree");
  int node = 0;
  while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    node = n.split->goes_left(x) ? n.left : n.right;
  }
  return node;
}

std::size_t MultivariateTree::leaf_index(std::span<const double> x) const {
  return static_cast<std::size_t>(leaf_number(route(x)));
}

void MultivariateTree::set_leaf_mean(std::size_t leaf, const Eigen::VectorXd& mean) {
  nodes_.at(static_cast<std::size_t>(leaf_nodes_.at(leaf))).mean = mean;
}

double node_impurity(const Eigen::MatrixXd& Y, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ArgumentError("node_impurity: empty node");
  const auto J = static_cast<std::size_t>(Y.cols());
  const Eigen::VectorXd mean = rows_mean(Y, rows);
  // Column-major copy so each response is one contiguous reduction.
  std::vector<double> column(rows.size());
  std::vector<double> centroid;
  double total = 0.0;
  const auto& kern = simd::kernels();
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      column[i] = Y(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(j));
    }
    centroid.assign(rows.size(), mean(static_cast<Eigen::Index>(j)));
    total += kern.sum_squared_diff(column.data(), centroid.data(), rows.size());
  }
  return total;
}

double node_impurity(const Eigen::MatrixXd& Y) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(Y.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return node_impurity(Y, rows);
}

std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                         std::span<const std::size_t> rows,
                                         const GrowControls& controls, double root_impurity) {
  if (rows.size() < 2 || rows.size() < controls.minsplit) return std::nullopt;
  const auto J = static_cast<std::size_t>(Y.cols());
  const auto k = static_cast<std::size_t>(X.cols());
  const std::size_t minbucket = std::max<std::size_t>(controls.minbucket, 1);
  const double parent = node_impurity(Y, rows);
  const double tol = kGainTieTolerance * parent;
  const auto& kern = simd::kernels();

  struct Scan {
    std::vector<double> gains;       // -inf where inadmissible
    std::vector<double> thresholds;
  };
  std::vector<Scan> scans(k);
  double best_gain = -std::numeric_limits<double>::infinity();

  std::vector<std::pair<double, std::size_t>> sorted;
  std::vector<double> prefix, totals(J), inv_left, inv_right, gains;
  for (std::size_t p = 0; p < k; ++p) {
    sorted.clear();
    for (auto r : rows) {
      const double v = X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p));
      if (!is_missing(v)) sorted.emplace_back(v, r);
    }
    const std::size_t m = sorted.size();
    if (m < 2 * minbucket || m < 2) continue;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t positions = m - 1;

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(J));
    for (const auto& s : sorted) mean += Y.row(static_cast<Eigen::Index>(s.second)).transpose();
    mean /= static_cast<double>(m);

    prefix.assign(J * positions, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      double running = 0.0;
      const auto jj = static_cast<Eigen::Index>(j);
      for (std::size_t i = 0; i < m; ++i) {
        running += Y(static_cast<Eigen::Index>(sorted[i].second), jj) - mean(jj);
        if (i < positions) prefix[j * positions + i] = running;
      }
      totals[j] = running;
    }
    inv_left.resize(positions);
    inv_right.resize(positions);
    for (std::size_t i = 0; i < positions; ++i) {
      inv_left[i] = 1.0 / static_cast<double>(i + 1);
      inv_right[i] = 1.0 / static_cast<double>(m - i - 1);
    }
    gains.resize(positions);
    kern.split_gains(prefix.data(), positions, J, totals.data(), inv_left.data(), inv_right.data(),
                     1.0 / static_cast<double>(m), gains.data());

    auto& scan = scans[p];
    scan.gains.assign(positions, -std::numeric_limits<double>::infinity());
    scan.thresholds.assign(positions, 0.0);
    for (std::size_t i = 0; i < positions; ++i) {
      const std::size_t nl = i + 1;
      const std::size_t nr = m - nl;
      if (nl < minbucket || nr < minbucket) continue;
      if (!(sorted[i].first < sorted[i + 1].first)) continue;
      scan.gains[i] = gains[i];
      scan.thresholds[i] = midpoint(sorted[i].first, sorted[i + 1].first);
      best_gain = std::max(best_gain, gains[i]);
    }
  }

  if (!(best_gain > controls.cp * root_impurity) || !(best_gain > tol)) return std::nullopt;
  for (std::size_t p = 0; p < k; ++p) {
    const auto& scan = scans[p];
    for (std::size_t i = 0; i < scan.gains.size(); ++i) {
      if (scan.gains[i] >= best_gain - tol) return SplitCandidate{p, scan.thresholds[i], scan.gains[i]};
    }
  }
  return std::nullopt;
}

MultivariateTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           std::span<const std::size_t> rows, const GrowControls& controls) {
  if (X.rows() != Y.rows()) throw ArgumentError("grow_tree: predictor and response rows differ");
  return Grower(X, Y, controls).run(std::vector<std::size_t>(rows.begin(), rows.end()));
}

MultivariateTree grow_tree(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const GrowControls& controls) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(Y.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return grow_tree(X, Y, rows, controls);
}

const PruneStep& ComplexityPath::at(double alpha) const {
  std::size_t pick = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].alpha <= alpha) pick = i;
  }
  return steps.at(pick);
}

ComplexityPath cost_complexity_path(const MultivariateTree& tree) {
  const auto& nodes = tree.nodes();
  const std::size_t n = nodes.size();
  ComplexityPath path;
  std::vector<char> collapsed(n, 0);
  for (std::size_t i = 0; i < n; ++i) collapsed[i] = static_cast<char>(nodes[i].is_leaf());

  std::vector<double> sub_impurity(n);
  std::vector<std::size_t> sub_leaves(n);
  std::vector<char> hidden(n, 0);
  auto summarize = [&] {
    // Children follow their parent in preorder, so a reverse sweep is post-order.
    for (std::size_t i = n; i-- > 0;) {
      if (collapsed[i]) {
        sub_impurity[i] = nodes[i].impurity;
        sub_leaves[i] = 1;
      } else {
        const auto l = static_cast<std::size_t>(nodes[i].left);
        const auto r = static_cast<std::size_t>(nodes[i].right);
        sub_impurity[i] = sub_impurity[l] + sub_impurity[r];
        sub_leaves[i] = sub_leaves[l] + sub_leaves[r];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (nodes[i].is_leaf()) continue;
      const bool h = hidden[i] || collapsed[i];
      hidden[static_cast<std::size_t>(nodes[i].left)] = h;
      hidden[static_cast<std::size_t>(nodes[i].right)] = h;
    }
  };
  summarize();
  path.steps.push_back({0.0, collapsed, sub_leaves[0], sub_impurity[0]});

  std::vector<double> g(n);
  while (!collapsed[0]) {
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (hidden[i] || collapsed[i]) continue;
      g[i] = (nodes[i].impurity - sub_impurity[i]) / static_cast<double>(sub_leaves[i] - 1);
      alpha = std::min(alpha, g[i]);
    }
    const double cutoff = alpha + 1e-12 * std::max(std::abs(alpha), 1e-300);
    for (std::size_t i = 0; i < n; ++i) {
      if (!hidden[i] && !collapsed[i] && g[i] <= cutoff) collapsed[i] = 1;
    }
    std::fill(hidden.begin(), hidden.end(), 0);
    summarize();
    alpha = std::max(alpha, 0.0);
    if (path.steps.size() > 1 && alpha <= path.steps.back().alpha) {
      path.steps.back() = {path.steps.back().alpha, collapsed, sub_leaves[0], sub_impurity[0]};
    } else {
      path.steps.push_back({alpha, collapsed, sub_leaves[0], sub_impurity[0]});
    }
  }
  return path;
}

MultivariateTree prune(const MultivariateTree& tree, const std::vector<char>& collapsed) {
  const auto& nodes = tree.nodes();
  std::vector<TreeNode> out;
  auto copy = [&](auto&& self, int idx) -> int {
    const auto& src = nodes[static_cast<std::size_t>(idx)];
    const int at = static_cast<int>(out.size());
    out.push_back(src);
    if (src.is_leaf() || collapsed[static_cast<std::size_t>(idx)]) {
      out[static_cast<std::size_t>(at)].split.reset();
      out[static_cast<std::size_t>(at)].left = -1;
      out[static_cast<std::size_t>(at)].right = -1;
      return at;
    }
    const int l = self(self, src.left);
    out[static_cast<std::size_t>(at)].left = l;
    const int r = self(self, src.right);
    out[static_cast<std::size_t>(at)].right = r;
    return at;
  };
  if (!nodes.empty()) copy(copy, 0);
  MultivariateTree result(std::move(out), tree.responses());
  result.complexity_trace = tree.complexity_trace;
  return result;
}

std::string_view to_string(SelectionRule r) { return r == SelectionRule::min ? "min" : "1se"; }

SelectionRule parse_selection(std::string_view s) {
  if (s == "min") return SelectionRule::min;
  if (s == "1se" || s == "one_se") return SelectionRule::one_se;
  throw ArgumentError("unknown selection rule: " + std::string(s));
}

MultivariateTree select_by_cv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                              const CvControls& cv, const GrowControls& controls, Rng& rng,
                              std::span<const std::size_t> groups, CvTable* table) {
  const auto n = static_cast<std::size_t>(Y.rows());
  const std::size_t K = cv.folds;
  if (K < 2) throw ArgumentError("cross-validation needs at least 2 folds");
  if (K > n) throw ArgumentError("fold count " + std::to_string(K) + " exceeds row count " + std::to_string(n));

  MultivariateTree full = grow_tree(X, Y, controls);
  const ComplexityPath path = cost_complexity_path(full);
  const std::size_t steps = path.steps.size();
  std::vector<double> beta(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    beta[i] = i + 1 < steps ? std::sqrt(path.steps[i].alpha * path.steps[i + 1].alpha)
                            : std::numeric_limits<double>::infinity();
  }

  std::vector<std::size_t> fold(n);
  if (cv.object_folds) {
    if (groups.size() != n) throw ArgumentError("object folds need one group id per row");
    const std::size_t G = *std::max_element(groups.begin(), groups.end()) + 1;
    if (K > G) throw ArgumentError("fold count exceeds object count");
    std::vector<std::size_t> perm(G);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    std::vector<std::size_t> group_fold(G);
    for (std::size_t i = 0; i < G; ++i) group_fold[perm[i]] = i % K;
    for (std::size_t r = 0; r < n; ++r) fold[r] = group_fold[groups[r]];
  } else {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % K;
  }

  const auto J = static_cast<std::size_t>(Y.cols());
  const auto& kern = simd::kernels();
  std::vector<std::vector<double>> fold_error(K, std::vector<double>(steps, 0.0));
  std::vector<double> xrow(static_cast<std::size_t>(X.cols()));
  for (std::size_t f = 0; f < K; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t r = 0; r < n; ++r) (fold[r] == f ? test : train).push_back(r);
    if (test.empty() || train.empty()) continue;
    const MultivariateTree tree = grow_tree(X, Y, train, controls);
    const ComplexityPath fpath = cost_complexity_path(tree);
    const auto& fnodes = tree.nodes();

    std::vector<std::vector<int>> routes(test.size());
    std::vector<double> truth(test.size() * J), pred(test.size() * J);
    for (std::size_t t = 0; t < test.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(test[t]);
      for (std::size_t p = 0; p < xrow.size(); ++p) xrow[p] = X(r, static_cast<Eigen::Index>(p));
      int node = 0;
      routes[t].push_back(node);
      while (!fnodes[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& nd = fnodes[static_cast<std::size_t>(node)];
        node = nd.split->goes_left(xrow) ? nd.left : nd.right;
        routes[t].push_back(node);
      }
      for (std::size_t j = 0; j < J; ++j) truth[t * J + j] = Y(r, static_cast<Eigen::Index>(j));
    }
    for (std::size_t s = 0; s < steps; ++s) {
      const auto& collapsed = fpath.at(beta[s]).collapsed;
      for (std::size_t t = 0; t < test.size(); ++t) {
        int hit = routes[t].back();
        for (int node : routes[t]) {
          if (collapsed[static_cast<std::size_t>(node)]) {
            hit = node;
            break;
          }
        }
        const auto& mean = fnodes[static_cast<std::size_t>(hit)].mean;
        for (std::size_t j = 0; j < J; ++j) pred[t * J + j] = mean(static_cast<Eigen::Index>(j));
      }
      fold_error[f][s] = kern.sum_squared_diff(pred.data(), truth.data(), pred.size());
    }
  }

  std::vector<double> error(steps), se(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    double sum = 0.0;
    for (std::size_t f = 0; f < K; ++f) sum += fold_error[f][s];
    const double mean = sum / static_cast<double>(K);
    double ss = 0.0;
    for (std::size_t f = 0; f < K; ++f) ss += (fold_error[f][s] - mean) * (fold_error[f][s] - mean);
    error[s] = mean;
    se[s] = std::sqrt(ss / static_cast<double>(K - 1)) / std::sqrt(static_cast<double>(K));
  }
  std::size_t best = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    if (error[s] <= error[best]) best = s;
  }
  std::size_t chosen = best;
  if (cv.rule == SelectionRule::one_se) {
    const double limit = error[best] + se[best];
    for (std::size_t s = 0; s < steps; ++s) {
      if (error[s] <= limit) chosen = s;
    }
  }
  if (table) {
    table->alpha.clear();
    table->leaves.clear();
    for (const auto& st : path.steps) {
      table->alpha.push_back(st.alpha);
      table->leaves.push_back(st.leaves);
    }
    table->error = error;
    table->std_error = se;
    table->chosen = chosen;
  }
  MultivariateTree selected = prune(full, path.steps[chosen].collapsed);
  selected.complexity_trace.clear();
  for (const auto& st : path.steps) selected.complexity_trace.push_back(st.alpha);
  return selected;
}

Eigen::VectorXd predict_tree(const MultivariateTree& tree, std::span<const double> x) {
  return tree.nodes()[static_cast<std::size_t>(tree.route(x))].mean;
}

namespace {
bool equal_from(const MultivariateTree& a, int ia, const MultivariateTree& b, int ib) {
  const auto& na = a.nodes()[static_cast<std::size_t>(ia)];
  const auto& nb = b.nodes()[static_cast<std::size_t>(ib)];
  if (na.is_leaf() || nb.is_leaf()) return na.is_leaf() && nb.is_leaf();
  if (na.split->predictor != nb.split->predictor) return false;
  return equal_from(a, na.left, b, nb.left) && equal_from(a, na.right, b, nb.right);
}
}  // namespace

bool structure_equal(const MultivariateTree& a, const MultivariateTree& b) {
  if (a.nodes().empty() || b.nodes().empty()) return a.nodes().empty() && b.nodes().empty();
  return equal_from(a, 0, b, 0);
}

std::string structure_signature(const MultivariateTree& tree) {
  std::string sig;
  for (const auto& n : tree.nodes()) {
    if (!sig.empty()) sig.push_back(' ');
    sig += n.is_leaf() ? std::string("L") : "x" + std::to_string(n.split->predictor);
  }
  return sig;
}

}  // namespace mvreem
