#include "mvreem/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mvreem/csv.hpp"
#include "mvreem/data_model.hpp"
#include "mvreem/error.hpp"
#include "mvreem/experiment.hpp"
#include "mvreem/reem.hpp"
#include "mvreem/serialize.hpp"

namespace mvreem {
namespace {

struct FitArgs {
  std::string data, object = "object", time = "time", out;
  std::vector<std::string> responses, predictors, design;
  std::string family = "gaussian", standardize = "marg", select = "min", residual = "diag";
  std::size_t folds = 10;
  double tol = 1e-4;
  int max_iter = 50;
  std::uint64_t seed = 1;
  std::size_t minsplit = 20, minbucket = 7, maxdepth = 30;
  double cp = 0.01;
  bool object_folds = false;
  bool no_random_effects = false;
};

struct PredictArgs {
  std::string model, data, out, object = "object", time = "time";
  bool population_only = false;
};

struct SimulateArgs {
  std::string scenario, out_dir;
  std::vector<std::size_t> I, T;
  std::vector<double> sigma12, sigmaB, sigma_eps2;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> methods;
  std::size_t jobs = 1;
  std::size_t folds = 10;
  double tol = 1e-4;
  int max_iter = 50;
  bool off_grid = false;
};

struct ReportArgs {
  std::string results, out_dir;
};

bool file_is_empty(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec) && std::filesystem::file_size(path, ec) == 0;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  return f;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  ReemOptions opts;
  opts.family = parse_family(a.family);
  opts.standardization = parse_standardization(a.standardize);
  opts.selection = parse_selection(a.select);
  opts.residual = parse_residual_structure(a.residual);
  opts.folds = a.folds;
  opts.tolerance = a.tol;
  opts.max_iterations = a.max_iter;
  opts.seed = a.seed;
  opts.object_folds = a.object_folds;
  opts.random_effects = !a.no_random_effects;
  opts.grow.minsplit = a.minsplit;
  opts.grow.minbucket = a.minbucket;
  opts.grow.maxdepth = a.maxdepth;
  opts.grow.cp = a.cp;
  opts.validate();

  ColumnRoles roles{a.object, a.time, a.responses, a.predictors, a.design};
  const LongitudinalDataset ds = load_csv(a.data, roles);
  if (opts.folds > ds.rows()) {
    throw ArgumentError("--folds " + std::to_string(opts.folds) + " exceeds the " + std::to_string(ds.rows()) +
                        " data rows");
  }
  const ReemModel model =
      opts.family == Family::gaussian_identity ? fit_reem(ds, opts) : fit_generalized_reem(ds, opts);
  save_model(model, a.out);
  out << "objects: " << ds.objects.size() << "\n"
      << "rows: " << ds.rows() << "\n"
      << "leaves: " << model.tree.leaf_count() << "\n"
      << "log-likelihood: " << format_double(model.mixed.log_likelihood) << "\n"
      << "iterations: " << model.trace.size() << "\n"
      << "status: " << to_string(model.status) << (model.eta_clamped ? " (linear predictor clamped)" : "") << "\n"
      << "model: " << a.out << "\n";
  return kExitOk;
}

int cmd_predict(const PredictArgs& a) {
  const ReemModel model = load_model(a.model);
  CsvTable table;
  if (!file_is_empty(a.data)) table = read_csv(a.data);

  auto out = open_out(a.out);
  out << "object,time";
  for (const auto& r : model.response_names) out << ',' << csv_escape("pred_" + r);
  out << ",warning\n";
  if (table.header.empty()) return kExitOk;

  const std::size_t obj_col = table.column(a.object);
  const std::size_t time_col = table.column(a.time);
  std::vector<std::size_t> x_cols;
  for (const auto& p : model.predictor_names) x_cols.push_back(table.column(p));
  std::vector<std::optional<std::size_t>> z_cols;
  for (const auto& d : model.design_names) {
    const bool present = std::find(table.header.begin(), table.header.end(), d) != table.header.end();
    if (!present && d == "(Intercept)") {
      z_cols.push_back(std::nullopt);
    } else {
      z_cols.push_back(table.column(d));
    }
  }

  std::vector<double> x(x_cols.size()), z(z_cols.size());
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      const auto& cell = row[x_cols[c]];
      if (is_missing_cell(cell)) {
        x[c] = kMissing;
      } else if (!parse_double(cell, x[c])) {
        throw DataError("line " + std::to_string(line) + ": non-numeric predictor in column " +
                        model.predictor_names[c]);
      }
    }
    for (std::size_t c = 0; c < z_cols.size(); ++c) {
      if (!z_cols[c]) {
        z[c] = 1.0;
      } else if (!parse_double(row[*z_cols[c]], z[c])) {
        throw DataError("line " + std::to_string(line) + ": design value missing or non-numeric in column " +
                        model.design_names[c]);
      }
    }
    const std::string& id = row[obj_col];
    const bool known = model.mixed.object_index(id).has_value();
    std::optional<std::string_view> object;
    if (!a.population_only) object = id;
    const Eigen::VectorXd pred = model.options.family == Family::gaussian_identity
                                     ? predict_reem(model, x, z, object)
                                     : predict_reem_mean(model, x, z, object);
    out << csv_escape(id) << ',' << csv_escape(row[time_col]);
    for (Eigen::Index j = 0; j < pred.size(); ++j) out << ',' << format_double(pred(j));
    out << ',' << (!a.population_only && !known ? "unknown object; population-level prediction" : "") << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& err) {
  for (const auto& m : a.methods) {
    if (!is_method_label(m)) {
      std::string valid;
      for (const auto& l : method_labels()) valid += (valid.empty() ? "" : ", ") + l;
      throw ArgumentError("--methods: unknown method label '" + m + "'; valid labels: " + valid);
    }
  }
  ExperimentConfig cfg;
  const Scenario scenario = parse_scenario(a.scenario);
  std::vector<double> sigmas = scenario == Scenario::five_response ? a.sigmaB : a.sigma12;
  if (sigmas.empty()) sigmas = scenario == Scenario::five_response ? a.sigma12 : a.sigmaB;
  if (sigmas.empty()) sigmas = {scenario == Scenario::no_random_effect ? 0.0 : 0.5};
  for (auto I : a.I) {
    for (auto T : a.T) {
      for (double s : sigmas) {
        for (double e : a.sigma_eps2) {
          SimulationConfig sc;
          sc.scenario = scenario;
          sc.objects = I;
          sc.times = T;
          sc.sigma = s;
          sc.sigma_eps2 = e;
          sc.off_grid = a.off_grid;
          cfg.grid.push_back(sc);
        }
      }
    }
  }
  cfg.methods = a.methods;
  cfg.reps = a.reps;
  cfg.master_seed = a.seed;
  cfg.jobs = a.jobs;
  cfg.base.folds = a.folds;
  cfg.base.tolerance = a.tol;
  cfg.base.max_iterations = a.max_iter;
  cfg.base.validate();
  cfg.progress = [&err](const std::string& line) { err << line << '\n'; };

  const ResultTable table = run_experiment(cfg);
  std::filesystem::create_directories(a.out_dir);
  {
    auto raw = open_out((std::filesystem::path(a.out_dir) / "raw.csv").string());
    write_results_csv(table, raw);
  }
  {
    auto agg = open_out((std::filesystem::path(a.out_dir) / "aggregate.csv").string());
    write_aggregate_csv(table, agg);
  }
  std::size_t failures = 0;
  for (const auto& r : table.rows) failures += r.failed() ? 1 : 0;
  err << "wrote " << table.rows.size() << " rows (" << failures << " failed) to " << a.out_dir << '\n';
  return kExitOk;
}

int cmd_report(const ReportArgs& a) {
  ResultTable table;
  if (!file_is_empty(a.results)) {
    std::ifstream in(a.results, std::ios::binary);
    if (!in) throw DataError("cannot open " + a.results);
    table = read_results_csv(in);
  }
  write_report(table, a.out_dir);
  auto agg = open_out((std::filesystem::path(a.out_dir) / "aggregate.csv").string());
  write_aggregate_csv(table, agg);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multivariate RE-EM trees for longitudinal multi-response data", "mvreem"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model to a long-format CSV panel");
  fit->add_option("--data", fa.data, "Input CSV")->required();
  fit->add_option("--responses", fa.responses, "Response columns (comma list)")->required()->delimiter(',');
  fit->add_option("--predictors", fa.predictors, "Predictor columns (comma list)")->required()->delimiter(',');
  fit->add_option("--object", fa.object, "Object id column")->required();
  fit->add_option("--time", fa.time, "Time column")->required();
  fit->add_option("--design", fa.design, "Random-effect design columns (default: intercept)")->delimiter(',');
  fit->add_option("--family", fa.family, "gaussian | bernoulli | poisson")
      ->check(CLI::IsMember({"gaussian", "bernoulli", "poisson"}));
  fit->add_option("--standardize", fa.standardize, "marg | cov | none")->check(CLI::IsMember({"marg", "cov", "none"}));
  fit->add_option("--select", fa.select, "min | 1se")->check(CLI::IsMember({"min", "1se"}));
  fit->add_option("--residual", fa.residual, "diag | full")->check(CLI::IsMember({"diag", "full"}));
  fit->add_option("--folds", fa.folds, "Cross-validation folds")->check(CLI::Range(std::size_t{2}, SIZE_MAX));
  fit->add_option("--tol", fa.tol, "Log-likelihood increase tolerance")->check(CLI::PositiveNumber);
  fit->add_option("--max-iter", fa.max_iter, "Maximum iterations")->check(CLI::Range(1, INT_MAX));
  fit->add_option("--seed", fa.seed, "Random seed");
  fit->add_option("--minsplit", fa.minsplit, "Minimum node size to attempt a split");
  fit->add_option("--minbucket", fa.minbucket, "Minimum leaf size")->check(CLI::Range(std::size_t{1}, SIZE_MAX));
  fit->add_option("--maxdepth", fa.maxdepth, "Maximum tree depth");
  fit->add_option("--cp", fa.cp, "Complexity parameter")->check(CLI::NonNegativeNumber);
  fit->add_flag("--object-folds", fa.object_folds, "Assign CV folds by object");
  fit->add_flag("--no-random-effects", fa.no_random_effects, "Hold D at zero");
  fit->add_option("--out", fa.out, "Model file to write")->required();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict from a saved model");
  predict->add_option("--model", pa.model, "Model file")->required();
  predict->add_option("--data", pa.data, "Input CSV")->required();
  predict->add_option("--out", pa.out, "Prediction CSV to write")->required();
  predict->add_option("--object", pa.object, "Object id column");
  predict->add_option("--time", pa.time, "Time column");
  predict->add_flag("--population-only", pa.population_only, "Ignore object random effects");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation sweep");
  simulate->add_option("--scenario", sa.scenario, "simple_bivariate | complex_bivariate | five_response | no_random_effect")
      ->required();
  simulate->add_option("--I", sa.I, "Objects (comma list)")->required()->delimiter(',');
  simulate->add_option("--T", sa.T, "Rows per object (comma list)")->required()->delimiter(',');
  simulate->add_option("--sigma12", sa.sigma12, "Random-effect correlation, bivariate (comma list)")->delimiter(',');
  simulate->add_option("--sigmaB", sa.sigmaB, "Random-effect correlation, five responses (comma list)")->delimiter(',');
  simulate->add_option("--sigma-eps,--sigma-eps2", sa.sigma_eps2, "Residual variance (comma list)")
      ->required()
      ->delimiter(',');
  simulate->add_option("--reps", sa.reps, "Replications")->required()->check(CLI::Range(std::size_t{1}, SIZE_MAX));
  simulate->add_option("--seed", sa.seed, "Master seed")->required();
  simulate->add_option("--methods", sa.methods, "Method labels (comma list)")->required()->delimiter(',');
  simulate->add_option("--out-dir", sa.out_dir, "Output directory")->required();
  simulate->add_option("--jobs", sa.jobs, "Worker threads")->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
  simulate->add_option("--folds", sa.folds, "Cross-validation folds")->check(CLI::Range(std::size_t{2}, SIZE_MAX));
  simulate->add_option("--tol", sa.tol, "Log-likelihood increase tolerance")->check(CLI::PositiveNumber);
  simulate->add_option("--max-iter", sa.max_iter, "Maximum iterations")->check(CLI::Range(1, INT_MAX));
  simulate->add_flag("--off-grid", sa.off_grid, "Allow parameters outside the published grids");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Emit plot-ready tables from raw results");
  report->add_option("--results", ra.results, "Raw results CSV")->required();
  report->add_option("--out-dir", ra.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitArgument;
  }

  try {
    if (*fit) return cmd_fit(fa, out);
    if (*predict) return cmd_predict(pa);
    if (*simulate) return cmd_simulate(sa, err);
    if (*report) return cmd_report(ra);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const FitError& e) {
    err << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return *report ? kExitData : kExitFit;
  }
  return kExitArgument;
}

}  // namespace mvreem
