#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvreem/cli.hpp"
#include "mvreem/csv.hpp"
#include "mvreem/reem.hpp"
#include "mvreem/serialize.hpp"
#include "mvreem/simgen.hpp"

using namespace mvreem;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mvreem");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("mvreem_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    SimulationConfig c;
    c.objects = 50;
    c.seed = 12;
    const auto p = generate_pair(c);
    std::ofstream train(dir / "train.csv");
    write_dataset_csv(p.train, train);
    std::ofstream test(dir / "test.csv");
    write_dataset_csv(p.test, test);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::vector<std::string> fit_args(const Workspace& w, const std::string& out) {
  return {"fit", "--data", w.path("train.csv"), "--responses", "y1,y2", "--predictors",
          "X1,X2,X3,X4,X5,X6,X7", "--object", "object", "--time", "time", "--out", out, "--seed", "4"};
}

}  // namespace

TEST_CASE("usage and argument errors") {
  CHECK(cli({}).code == kExitArgument);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"fit", "--help"}).code == kExitOk);
  CHECK(cli({"bogus"}).code == kExitArgument);
  const auto r = cli({"fit", "--data", "x.csv"});
  CHECK(r.code == kExitArgument);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("fit and predict") {
  Workspace w;
  const auto model = w.path("m.json");
  auto r = cli(fit_args(w, model));
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("status:") != std::string::npos);
  CHECK(fs::exists(model));

  r = cli({"predict", "--model", model, "--data", w.path("test.csv"), "--object", "object", "--time", "time",
           "--out", w.path("p.csv")});
  REQUIRE(r.code == kExitOk);
  const auto table = read_csv(w.path("p.csv"));
  CHECK(table.header == std::vector<std::string>{"object", "time", "pred_y1", "pred_y2", "warning"});
  CHECK(table.rows.size() == 50 * 20);

  // Values equal the library prediction from the saved model.
  const auto m = load_model(model);
  ColumnRoles roles;
  roles.object = "object";
  roles.time = "time";
  roles.responses = {"y1", "y2"};
  roles.predictors = m.predictor_names;
  const auto test = load_csv(w.path("test.csv"), roles);
  for (std::size_t i = 0; i < table.rows.size(); i += 97) {
    const auto ri = static_cast<Eigen::Index>(i);
    std::vector<double> x(7);
    for (int k = 0; k < 7; ++k) x[static_cast<std::size_t>(k)] = test.X(ri, k);
    const double z[1] = {1.0};
    const auto want = predict_reem(m, x, z, std::string_view(table.rows[i][0]));
    double got = 0;
    REQUIRE(parse_double(table.rows[i][2], got));
    CHECK(got == want(0));
    CHECK(table.rows[i][4].empty());
  }
}

TEST_CASE("unknown objects are predicted at the population level with a warning") {
  Workspace w;
  REQUIRE(cli(fit_args(w, w.path("m.json"))).code == kExitOk);
  std::ofstream(w.path("new.csv")) << "object,time,X1,X2,X3,X4,X5,X6,X7\nstranger,1,1,1,1,1,1,1,0\n";
  const auto r = cli({"predict", "--model", w.path("m.json"), "--data", w.path("new.csv"), "--object", "object",
                      "--time", "time", "--out", w.path("p.csv")});
  REQUIRE(r.code == kExitOk);
  const auto t = read_csv(w.path("p.csv"));
  REQUIRE(t.rows.size() == 1);
  CHECK_FALSE(t.rows[0][4].empty());
}

TEST_CASE("data and fit problems map to exit codes") {
  Workspace w;
  auto args = fit_args(w, w.path("m.json"));
  args[2] = w.path("missing.csv");
  CHECK(cli(args).code == kExitData);
  args = fit_args(w, w.path("m.json"));
  args[4] = "y1,nope";
  CHECK(cli(args).code == kExitData);
  args = fit_args(w, w.path("m.json"));
  args.insert(args.end(), {"--family", "poisson"});
  CHECK(cli(args).code == kExitData);  // responses are not counts
  args = fit_args(w, w.path("m.json"));
  args.insert(args.end(), {"--standardize", "whiten"});
  CHECK(cli(args).code == kExitArgument);
  CHECK(cli({"predict", "--model", w.path("none.json"), "--data", w.path("test.csv"), "--object", "object",
             "--time", "time", "--out", w.path("p.csv")})
            .code == kExitData);
}

TEST_CASE("runs are byte-reproducible") {
  Workspace w;
  REQUIRE(cli(fit_args(w, w.path("a.json"))).code == kExitOk);
  REQUIRE(cli(fit_args(w, w.path("b.json"))).code == kExitOk);
  CHECK(slurp(w.path("a.json")) == slurp(w.path("b.json")));

  const std::vector<std::string> sim = {"simulate", "--scenario", "simple_bivariate", "--I", "50", "--T", "5",
                                        "--sigma-eps", "1", "--reps", "2", "--seed", "3", "--methods",
                                        "multiREEM_min_marg,multitree"};
  auto s1 = sim;
  s1.insert(s1.end(), {"--out-dir", w.path("s1")});
  auto s2 = sim;
  s2.insert(s2.end(), {"--out-dir", w.path("s2"), "--jobs", "2"});
  REQUIRE(cli(s1).code == kExitOk);
  REQUIRE(cli(s2).code == kExitOk);
  CHECK(slurp(w.dir / "s1" / "raw.csv") == slurp(w.dir / "s2" / "raw.csv"));
  CHECK(slurp(w.dir / "s1" / "aggregate.csv") == slurp(w.dir / "s2" / "aggregate.csv"));

  REQUIRE(cli({"report", "--results", w.path("s1/raw.csv"), "--out-dir", w.path("r")}).code == kExitOk);
  CHECK(fs::exists(w.dir / "r" / "recovery.csv"));
  CHECK(slurp(w.dir / "r" / "aggregate.csv") == slurp(w.dir / "s1" / "aggregate.csv"));
  CHECK(cli({"simulate", "--scenario", "simple_bivariate", "--I", "37", "--T", "5", "--sigma-eps", "1", "--reps",
             "1", "--seed", "3", "--methods", "multitree", "--out-dir", w.path("s3")})
            .code == kExitArgument);
}
