#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>

#include "mvreem/error.hpp"
#include "mvreem/reem.hpp"
#include "mvreem/serialize.hpp"
#include "mvreem/simgen.hpp"

using namespace mvreem;

namespace {

ReemModel fitted(std::uint64_t seed, Standardization s = Standardization::marg) {
  SimulationConfig c;
  c.objects = 50;
  c.seed = seed;
  auto p = generate_pair(c);
  p.train.X(3, 1) = kMissing;
  ReemOptions o;
  o.standardization = s;
  o.residual = seed % 2 ? ResidualStructure::full_response_cov : ResidualStructure::diag_by_response;
  return fit_reem(p.train, o);
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("serialization round trips bit-exactly") {
  for (std::uint64_t seed : {1, 2}) {
    for (auto s : {Standardization::marg, Standardization::cov, Standardization::none}) {
      const auto m = fitted(seed, s);
      const std::string text = serialize_model(m);
      const auto back = parse_model(text);
      CHECK(serialize_model(back) == text);
      CHECK(back.status == m.status);
      CHECK(back.trace.size() == m.trace.size());
      Rng rng(seed);
      for (int i = 0; i < 50; ++i) {
        std::vector<double> x(7);
        for (auto& v : x) v = rng.uniform(0, 10);
        if (i % 7 == 0) x[0] = kMissing;
        const double z[1] = {1.0};
        const std::string_view id = m.mixed.object_ids[static_cast<std::size_t>(i) % m.mixed.object_ids.size()];
        CHECK(same_bits(predict_reem(m, x, z, id), predict_reem(back, x, z, id)));
        CHECK(same_bits(predict_reem(m, x, z, std::nullopt), predict_reem(back, x, z, std::nullopt)));
      }
    }
  }
}

TEST_CASE("files on disk") {
  const auto m = fitted(3);
  const auto path = std::filesystem::temp_directory_path() / "mvreem_serialize_test.json";
  save_model(m, path.string());
  const auto back = load_model(path.string());
  CHECK(serialize_model(back) == serialize_model(m));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path.string()), DataError);
}

TEST_CASE("malformed documents are data errors") {
  CHECK_THROWS_AS(parse_model("{"), DataError);
  CHECK_THROWS_AS(parse_model("{}"), DataError);
  auto text = serialize_model(fitted(4));
  const auto pos = text.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::strlen("\"schema_version\": 1"), "\"schema_version\": 99");
  CHECK_THROWS_AS(parse_model(text), DataError);
}

TEST_CASE("tree export names predictors") {
  const auto t = true_tree(Scenario::simple_bivariate);
  const auto s = serialize_tree(t, {"X1", "X2", "X3", "X4", "X5", "X6", "X7"});
  CHECK(s.find("X1") != std::string::npos);
  CHECK(s.find("X3") != std::string::npos);
}
