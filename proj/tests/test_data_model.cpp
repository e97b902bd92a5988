#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mvreem/csv.hpp"
#include "mvreem/data_model.hpp"
#include "mvreem/error.hpp"
#include "support.hpp"

using namespace mvreem;

namespace {

LongitudinalDataset from_text(const std::string& text, const ColumnRoles& roles) {
  std::istringstream in(text);
  return dataset_from_table(parse_csv(in), roles);
}

ColumnRoles basic_roles() {
  ColumnRoles r;
  r.object = "id";
  r.time = "t";
  r.responses = {"a", "b"};
  r.predictors = {"x"};
  return r;
}

}  // namespace

TEST_CASE("rows are grouped by object and sorted by time") {
  const auto ds = from_text(
      "id,t,a,b,x\n"
      "s2,3,1,2,0.5\n"
      "s1,10,3,4,NA\n"
      "s2,1,5,6,1.5\n"
      "s1,2,7,8,2.5\n",
      basic_roles());
  REQUIRE(ds.objects.size() == 2);
  CHECK(ds.objects[0].id == "s1");
  CHECK(ds.objects[0].begin == 0);
  CHECK(ds.objects[0].count == 2);
  CHECK(ds.objects[1].id == "s2");
  // numeric time order, not lexicographic
  CHECK(ds.time_labels == std::vector<std::string>{"2", "10", "1", "3"});
  CHECK(ds.Y(0, 0) == 7);
  CHECK(ds.Y(1, 1) == 4);
  CHECK(is_missing(ds.X(1, 0)));
  CHECK(ds.design_names == std::vector<std::string>{"(Intercept)"});
  CHECK(ds.Z.isOnes());
  CHECK(ds.row_objects() == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(ds.find_object("s2") == std::optional<std::size_t>(1));
  CHECK_FALSE(ds.find_object("zz").has_value());
}

TEST_CASE("malformed inputs raise DataError") {
  const auto roles = basic_roles();
  CHECK_THROWS_AS(from_text("id,t,a,b,x\ns1,1,NA,2,3\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,b,x\ns1,1,q,2,3\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,b,x\ns1,1,1,2,abc\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,b,x\ns1,1,1,2,3\ns1,1,4,5,6\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,b,x\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,x\ns1,1,1,3\n", roles), DataError);
  CHECK_THROWS_AS(from_text("id,t,a,b,x\n,1,1,2,3\n", roles), DataError);
}

TEST_CASE("csv round trip through write_dataset_csv") {
  Rng rng(5);
  auto ds = testsupport::random_panel(rng, 4, 3, 2, 2, 2);
  ds.X(2, 1) = kMissing;
  std::ostringstream out;
  write_dataset_csv(ds, out);
  ColumnRoles roles;
  roles.object = "object";
  roles.time = "time";
  roles.responses = ds.response_names;
  roles.predictors = ds.predictor_names;
  roles.design = ds.design_names;
  const auto back = from_text(out.str(), roles);
  CHECK(back.Y == ds.Y);
  CHECK(back.Z == ds.Z);
  CHECK(is_missing(back.X(2, 1)));
  CHECK(back.X(3, 0) == ds.X(3, 0));
}

TEST_CASE("format_double round trips") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    double back = 0;
    REQUIRE(parse_double(format_double(v), back));
    CHECK(back == v);
  }
  double tmp;
  CHECK_FALSE(parse_double("1.5x", tmp));
  CHECK(is_missing_cell("NA"));
  CHECK(is_missing_cell(""));
  CHECK(csv_escape("a,b") == "\"a,b\"");
}

TEST_CASE("standardization maps are inverse to each other") {
  Rng rng(3);
  const auto ds = testsupport::random_panel(rng, 10, 4, 3, 2, 1);
  for (auto method : {Standardization::none, Standardization::marg, Standardization::cov}) {
    const auto st = standardize(ds, method);
    const Eigen::MatrixXd back = inverse_transform(st.data.Y, st.transform);
    CHECK((back - ds.Y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((st.transform.whiten * st.transform.unwhiten - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-10);
  }
  const Eigen::MatrixXd marg = sample_covariance(standardize(ds, Standardization::marg).data.Y);
  for (int j = 0; j < 3; ++j) CHECK(marg(j, j) == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::MatrixXd cov = sample_covariance(standardize(ds, Standardization::cov).data.Y);
  CHECK((cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(standardize(ds, Standardization::none).data.Y == ds.Y);
}

TEST_CASE("standardization rejects degenerate responses") {
  Rng rng(3);
  auto ds = testsupport::random_panel(rng, 5, 3, 2, 1, 1);
  ds.Y.col(1).setConstant(2.0);
  CHECK_THROWS_AS(standardize(ds, Standardization::marg), DataError);
  ds.Y.col(1) = 2.0 * ds.Y.col(0);
  CHECK_THROWS_AS(standardize(ds, Standardization::cov), DataError);
}

TEST_CASE("family functions") {
  for (double eta : {-3.0, -0.2, 0.0, 1.7}) {
    for (auto f : {Family::gaussian_identity, Family::bernoulli_logit, Family::poisson_log}) {
      CHECK(link_function(f, mean_function(f, eta)) == doctest::Approx(eta).epsilon(1e-12));
      const double h = 1e-6;
      const double fd = (mean_function(f, eta + h) - mean_function(f, eta - h)) / (2 * h);
      CHECK(mean_derivative(f, eta) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(check_family_domain(Family::bernoulli_logit, 0.5), DataError);
  CHECK_THROWS_AS(check_family_domain(Family::poisson_log, -1.0), DataError);
  CHECK_THROWS_AS(check_family_domain(Family::poisson_log, 1.5), DataError);
  CHECK_NOTHROW(check_family_domain(Family::poisson_log, 3.0));
  CHECK(parse_family(to_string(Family::poisson_log)) == Family::poisson_log);
  CHECK(parse_standardization("cov") == Standardization::cov);
  CHECK_THROWS_AS(parse_standardization("zz"), ArgumentError);
}

TEST_CASE("validate catches broken invariants") {
  Rng rng(8);
  auto ds = testsupport::random_panel(rng, 3, 2, 1, 1, 1);
  CHECK_NOTHROW(ds.validate());
  auto bad = ds;
  bad.objects[1].begin = 3;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = ds;
  bad.Y(0, 0) = kMissing;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = ds;
  bad.objects[1].id = bad.objects[0].id;
  CHECK_THROWS_AS(bad.validate(), DataError);
  const auto one = ds.with_response(0);
  CHECK(one.responses() == 1);
}
