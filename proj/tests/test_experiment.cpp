#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvreem/csv.hpp"
#include "mvreem/error.hpp"
#include "mvreem/experiment.hpp"

using namespace mvreem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  SimulationConfig a;
  a.objects = 50;
  SimulationConfig b = a;
  b.scenario = Scenario::no_random_effect;
  c.grid = {a, b};
  c.methods = {"multiREEM_min_marg", "uniREEM", "multitree", "multilme"};
  c.reps = 2;
  c.master_seed = 77;
  return c;
}

std::string as_csv(const ResultTable& t) {
  std::ostringstream out;
  write_results_csv(t, out);
  return out.str();
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(data_seed(1, 0, 0) == data_seed(1, 0, 0));
  CHECK(data_seed(1, 0, 0) != data_seed(1, 0, 1));
  CHECK(data_seed(1, 0, 0) != data_seed(1, 1, 0));
  CHECK(data_seed(1, 0, 0) != fit_seed(1, 0, 0));
  CHECK(data_seed(1, 0, 0) != data_seed(2, 0, 0));
}

TEST_CASE("method labels") {
  CHECK(method_labels().size() == 8);
  CHECK(is_method_label("multiREEM_1se_cov"));
  CHECK_FALSE(is_method_label("multiREEM_2se_cov"));
  SimulationConfig c;
  c.objects = 50;
  const auto p = generate_pair(c);
  CHECK_THROWS_AS(fit_method(p.train, "forest", ReemOptions{}), ArgumentError);
}

TEST_CASE("results do not depend on the worker count") {
  auto c = small_config();
  const auto serial = run_experiment(c);
  c.jobs = 3;
  const auto parallel = run_experiment(c);
  CHECK(as_csv(serial) == as_csv(parallel));
  CHECK(serial.rows.size() == 2 * 2 * 4);
  for (const auto& r : serial.rows) {
    CHECK_FALSE(r.failed());
    if (r.method == "multilme") CHECK_FALSE(r.recovered.size());
    if (r.method == "uniREEM") CHECK(r.recovered.size() == 2);
    if (r.method == "multitree") CHECK_FALSE(r.re_pmse.has_value());
    if (r.method == "multiREEM_min_marg") CHECK(r.sigma12_emse.has_value());
  }
}

TEST_CASE("methods within a replication share the data") {
  auto c = small_config();
  c.grid.resize(1);
  c.reps = 1;
  const auto t = run_experiment(c);
  for (const auto& r : t.rows) CHECK(r.seed == t.rows.front().seed);
}

TEST_CASE("raw results round trip through csv") {
  auto c = small_config();
  c.reps = 1;
  const auto t = run_experiment(c);
  const auto text = as_csv(t);
  std::istringstream in(text);
  const auto back = read_results_csv(in);
  CHECK(as_csv(back) == text);
  std::istringstream junk("scenario,I\nfoo,bar\n");
  CHECK_THROWS_AS(read_results_csv(junk), DataError);
}

TEST_CASE("aggregation skips failed fits") {
  ResultTable t;
  ResultRow ok;
  ok.scenario = "simple_bivariate";
  ok.I = 100;
  ok.T = 5;
  ok.sigma = 0.5;
  ok.sigma_eps2 = 1;
  ok.method = "multitree";
  ok.status = "ok";
  ok.pmse = 2.0;
  ok.emse_fixed = 1.0;
  ok.recovered = {true};
  ResultRow ok2 = ok;
  ok2.pmse = 4.0;
  ok2.recovered = {false};
  ResultRow bad = ok;
  bad.status = "error";
  bad.pmse = 1e9;
  bad.message = "boom";
  t.rows = {ok, ok2, bad};
  std::ostringstream out;
  write_aggregate_csv(t, out);
  std::istringstream in(out.str());
  const auto table = parse_csv(in);
  REQUIRE(table.rows.size() == 1);
  const auto& row = table.rows[0];
  CHECK(row[table.column("reps")] == "3");
  CHECK(row[table.column("failures")] == "1");
  CHECK(row[table.column("pmse")] == "3");
  CHECK(row[table.column("recovery")] == "0.5");
  CHECK(row[table.column("re_pmse")] == "NA");

  const auto dir = std::filesystem::temp_directory_path() / "mvreem_report_test";
  std::filesystem::remove_all(dir);
  write_report(t, dir.string());
  for (const char* name : {"pmse.csv", "emse_fixed.csv", "re_pmse.csv", "sigma12_emse.csv", "recovery.csv"}) {
    std::ifstream f(dir / name);
    REQUIRE(f.good());
    std::string header;
    std::getline(f, header);
    CHECK(header == "scenario,I,T,sigma,sigma_eps2,method,n,value");
  }
  std::ifstream f(dir / "pmse.csv");
  std::string line;
  std::getline(f, line);
  std::getline(f, line);
  CHECK(line == "simple_bivariate,100,5,0.5,1,multitree,2,3");
  std::filesystem::remove_all(dir);
}
