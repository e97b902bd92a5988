#include <doctest.h>

#include "mvreem/error.hpp"
#include "mvreem/evalmetrics.hpp"
#include "mvreem/simgen.hpp"

using namespace mvreem;

TEST_CASE("pmse divides by objects times test rows") {
  Eigen::MatrixXd pred(4, 2), truth(4, 2);
  pred << 1, 2, 3, 4, 5, 6, 7, 8;
  truth = pred;
  truth(0, 0) += 2;  // 4
  truth(3, 1) -= 1;  // 1
  CHECK(pmse(pred, truth, 2, 2) == doctest::Approx(5.0 / 4.0));
  CHECK(emse_fixed(pred, truth, 1, 4) == doctest::Approx(5.0 / 4.0));
  CHECK(pmse(pred, pred, 2, 2) == 0.0);
  CHECK_THROWS_AS(pmse(pred, truth, 3, 2), ArgumentError);
  CHECK_THROWS_AS(pmse(pred, truth.leftCols(1), 2, 2), ArgumentError);
}

TEST_CASE("random-effect error matches objects by id") {
  ObjectEffects truth{{"a", Eigen::MatrixXd::Constant(2, 1, 1.0)}, {"b", Eigen::MatrixXd::Constant(2, 1, -1.0)}};
  ObjectEffects est{{"b", Eigen::MatrixXd::Constant(2, 1, -1.0)}, {"a", Eigen::MatrixXd::Constant(2, 1, 3.0)}};
  // object a contributes (2^2 + 2^2) / 2 entries, object b nothing
  CHECK(re_pmse(est, truth) == doctest::Approx(2.0));
  est[1].first = "c";
  CHECK_THROWS_AS(re_pmse(est, truth), ArgumentError);
}

TEST_CASE("sigma12 error") {
  Eigen::MatrixXd D(2, 2);
  D << 1, 0.3, 0.3, 1;
  CHECK(sigma12_emse(D, 0.5) == doctest::Approx(0.04));
  CHECK_THROWS_AS(sigma12_emse(Eigen::MatrixXd::Ones(1, 1), 0.5), ArgumentError);
}

TEST_CASE("recovery rate") {
  const auto simple = true_tree(Scenario::simple_bivariate);
  const auto complex = true_tree(Scenario::complex_bivariate);
  CHECK(recovery_rate({&simple, &simple}, simple) == 1.0);
  CHECK(recovery_rate({&simple, &complex}, simple) == 0.5);
  CHECK_THROWS_AS(recovery_rate({}, simple), ArgumentError);
}
