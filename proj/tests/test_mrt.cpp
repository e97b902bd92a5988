#include <doctest.h>

#include <numeric>
#include <utility>

#include "mvreem/error.hpp"
#include "mvreem/mrt.hpp"
#include "mvreem/simd/kernels.hpp"
#include "oracles.hpp"

using namespace mvreem;

namespace {

// (impurity, leaves) of every pruning of the subtree at `node`.
std::vector<std::pair<double, std::size_t>> prunings(const MultivariateTree& t, int node) {
  const auto& nd = t.nodes()[static_cast<std::size_t>(node)];
  std::vector<std::pair<double, std::size_t>> out{{nd.impurity, 1}};
  if (nd.is_leaf()) return out;
  for (const auto& l : prunings(t, nd.left)) {
    for (const auto& r : prunings(t, nd.right)) out.emplace_back(l.first + r.first, l.second + r.second);
  }
  return out;
}

Eigen::MatrixXd step_data(Rng& rng, Eigen::Index n, Eigen::MatrixXd& X) {
  X.resize(n, 3);
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index p = 0; p < 3; ++p) X(i, p) = rng.uniform(0, 10);
    const double f = (X(i, 0) > 5 ? 3.0 : 0.0) + (X(i, 1) > 5 ? 1.5 : 0.0);
    Y(i, 0) = f + 0.5 * rng.normal();
    Y(i, 1) = 0.5 * f + 0.5 * rng.normal();
  }
  return Y;
}

}  // namespace

TEST_CASE("node impurity matches the two-pass definition") {
  Rng rng(2);
  Eigen::MatrixXd Y(30, 3);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.normal() * 4 + 100;
  std::vector<std::size_t> rows(30);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  CHECK(node_impurity(Y, rows) == doctest::Approx(oracle::impurity(Y, rows)).epsilon(1e-12));
  CHECK(node_impurity(Y) == doctest::Approx(oracle::impurity(Y, rows)).epsilon(1e-12));
}

TEST_CASE("best split equals exhaustive search") {
  Rng rng(404);
  int splits = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto sc = oracle::random_split_case(rng);
    const auto got = best_split(sc.X, sc.Y, sc.rows, sc.controls, sc.root_impurity);
    const auto want = oracle::exhaustive_split(sc.X, sc.Y, sc.rows, sc.controls, sc.root_impurity);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    ++splits;
    CHECK(got->predictor == want->predictor);
    CHECK(got->threshold == want->threshold);
    CHECK(got->gain == doctest::Approx(want->gain).epsilon(1e-9));
  }
  CHECK(splits > 100);
}

TEST_CASE("split search does not depend on the kernel set") {
  const auto before = simd::kernels().isa;
  Rng rng(77);
  std::vector<oracle::SplitCase> cases;
  for (int i = 0; i < 100; ++i) cases.push_back(oracle::random_split_case(rng));
  std::vector<std::optional<SplitCandidate>> fast;
  for (const auto& sc : cases) fast.push_back(best_split(sc.X, sc.Y, sc.rows, sc.controls, sc.root_impurity));
  simd::select_isa(simd::Isa::scalar);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& sc = cases[i];
    const auto slow = best_split(sc.X, sc.Y, sc.rows, sc.controls, sc.root_impurity);
    REQUIRE(slow.has_value() == fast[i].has_value());
    if (slow) {
      CHECK(slow->predictor == fast[i]->predictor);
      CHECK(slow->threshold == fast[i]->threshold);
      CHECK(slow->gain == fast[i]->gain);
    }
  }
  simd::select_isa(before);
}

TEST_CASE("ties go to the lowest predictor and threshold") {
  // Columns 0 and 1 are identical; column 1 must never win.
  Eigen::MatrixXd X(8, 2);
  Eigen::MatrixXd Y(8, 1);
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = X(i, 1) = i;
    Y(i, 0) = i < 4 ? 0.0 : 1.0;
  }
  GrowControls c;
  c.minsplit = 2;
  c.minbucket = 1;
  c.cp = 0;
  std::vector<std::size_t> rows(8);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto s = best_split(X, Y, rows, c, 2.0);
  REQUIRE(s);
  CHECK(s->predictor == 0);
  CHECK(s->threshold == 3.5);
  // Symmetric responses: splits at 1.5 and 5.5 tie; the lower one wins.
  Eigen::MatrixXd Y2(8, 1);
  Y2 << 5, 5, 0, 0, 0, 0, 5, 5;
  const auto s2 = best_split(X, Y2, rows, c, 0.0);
  REQUIRE(s2);
  CHECK(s2->threshold == 1.5);
}

TEST_CASE("grown tree respects the controls and conserves counts") {
  Rng rng(5);
  Eigen::MatrixXd X;
  const Eigen::MatrixXd Y = step_data(rng, 300, X);
  GrowControls c;
  c.cp = 0.001;
  const auto tree = grow_tree(X, Y, c);
  for (const auto& nd : tree.nodes()) {
    if (nd.is_leaf()) {
      CHECK(nd.count >= c.minbucket);
      continue;
    }
    const auto& l = tree.nodes()[static_cast<std::size_t>(nd.left)];
    const auto& r = tree.nodes()[static_cast<std::size_t>(nd.right)];
    CHECK(l.count + r.count == nd.count);
    CHECK(l.depth == nd.depth + 1);
    CHECK(l.impurity + r.impurity <= nd.impurity + 1e-9);
  }
  GrowControls shallow = c;
  shallow.maxdepth = 1;
  CHECK(grow_tree(X, Y, shallow).leaf_count() == 2);
  shallow.maxdepth = 0;
  CHECK(grow_tree(X, Y, shallow).leaf_count() == 1);
}

TEST_CASE("complexity path is the lower envelope of all prunings") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd X;
    const Eigen::MatrixXd Y = step_data(rng, 60, X);
    GrowControls c;
    c.cp = 0.0;
    c.minsplit = 10;
    c.minbucket = 4;
    c.maxdepth = 4;
    const auto tree = grow_tree(X, Y, c);
    const auto all = prunings(tree, 0);
    const auto path = cost_complexity_path(tree);
    REQUIRE(!path.steps.empty());
    CHECK(path.steps.front().leaves == tree.leaf_count());
    CHECK(path.steps.back().leaves == 1);
    for (std::size_t s = 0; s < path.steps.size(); ++s) {
      const auto& st = path.steps[s];
      if (s > 0) {
        CHECK(st.alpha > path.steps[s - 1].alpha);
        CHECK(st.leaves < path.steps[s - 1].leaves);
      }
      const double hi = s + 1 < path.steps.size() ? path.steps[s + 1].alpha : st.alpha * 2 + 1;
      for (double alpha : {st.alpha, 0.5 * (st.alpha + hi)}) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : all) best = std::min(best, p.first + alpha * static_cast<double>(p.second));
        const double mine = st.impurity + alpha * static_cast<double>(st.leaves);
        CHECK(mine == doctest::Approx(best).epsilon(1e-9));
      }
      const auto pruned = prune(tree, st.collapsed);
      CHECK(pruned.leaf_count() == st.leaves);
      CHECK(&path.at(st.alpha) == &st);
    }
  }
}

TEST_CASE("cross-validated selection") {
  Rng data_rng(8);
  Eigen::MatrixXd X;
  const Eigen::MatrixXd Y = step_data(data_rng, 200, X);
  GrowControls g;
  CvControls cv;
  CvTable tmin, t1se;
  Rng a(3), b(3), c(3);
  const auto m1 = select_by_cv(X, Y, cv, g, a, {}, &tmin);
  const auto m2 = select_by_cv(X, Y, cv, g, b);
  CHECK(structure_signature(m1) == structure_signature(m2));
  for (std::size_t s = 0; s < tmin.error.size(); ++s) CHECK(tmin.error[tmin.chosen] <= tmin.error[s]);
  CHECK(m1.leaf_count() == tmin.leaves[tmin.chosen]);
  cv.rule = SelectionRule::one_se;
  const auto s1 = select_by_cv(X, Y, cv, g, c, {}, &t1se);
  CHECK(s1.leaf_count() <= m1.leaf_count());
  CHECK(t1se.error[t1se.chosen] <= tmin.error[tmin.chosen] + tmin.std_error[tmin.chosen] + 1e-12);
  // The true structure has four cells.
  CHECK(m1.leaf_count() == 4);

  std::vector<std::size_t> groups(200);
  for (std::size_t i = 0; i < 200; ++i) groups[i] = i / 5;
  cv.object_folds = true;
  Rng d(3);
  CHECK(select_by_cv(X, Y, cv, g, d, groups).leaf_count() >= 1);
  cv.folds = 500;
  Rng e(3);
  CHECK_THROWS_AS(select_by_cv(X, Y, cv, g, e), ArgumentError);
}

TEST_CASE("missing predictors route through surrogates") {
  Rng rng(12);
  Eigen::MatrixXd X(200, 2);
  Eigen::MatrixXd Y(200, 1);
  for (Eigen::Index i = 0; i < 200; ++i) {
    X(i, 0) = rng.uniform(0, 10);
    X(i, 1) = X(i, 0) + 0.01;  // perfect agreement
    Y(i, 0) = X(i, 0) > 5 ? 4.0 : 0.0;
  }
  GrowControls c;
  const auto tree = grow_tree(X, Y, c);
  REQUIRE(tree.leaf_count() == 2);
  const auto& root = tree.nodes()[0];
  REQUIRE(root.split);
  CHECK(root.split->predictor == 0);
  REQUIRE(!root.split->surrogates.empty());
  CHECK(root.split->surrogates.front().predictor == 1);
  CHECK(root.split->surrogates.front().agreement == doctest::Approx(1.0));
  for (double v : {1.0, 9.0}) {
    const double full[2] = {v, v + 0.01};
    const double hole[2] = {kMissing, v + 0.01};
    CHECK(tree.leaf_index(full) == tree.leaf_index(hole));
  }
  const double none[2] = {kMissing, kMissing};
  CHECK(tree.leaf_index(none) == (root.split->majority_left ? 0u : 1u));
}

TEST_CASE("structure comparison") {
  Rng rng(5);
  Eigen::MatrixXd X;
  const Eigen::MatrixXd Y = step_data(rng, 200, X);
  GrowControls c;
  const auto a = grow_tree(X, Y, c);
  auto b = a;
  b.set_leaf_mean(0, Eigen::VectorXd::Constant(2, 99.0));
  CHECK(structure_equal(a, b));
  c.maxdepth = 1;
  const auto d = grow_tree(X, Y, c);
  CHECK_FALSE(structure_equal(a, d));
  CHECK(structure_signature(a) != structure_signature(d));
  CHECK(parse_selection(to_string(SelectionRule::one_se)) == SelectionRule::one_se);
}
