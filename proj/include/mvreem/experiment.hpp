#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvreem/baselines.hpp"
#include "mvreem/evalmetrics.hpp"
#include "mvreem/reem.hpp"
#include "mvreem/simgen.hpp"

namespace mvreem {

/// Method labels accepted by the harness, in report order.
const std::vector<std::string>& method_labels();
bool is_method_label(std::string_view label);

/// Fits one labelled method. multiREEM_<rule>_<std> labels override the
/// selection rule and standardization of `opts`; uniREEM and multitree use
/// the "min" rule with "marg" standardization; the linear models use opts.
std::unique_ptr<Predictor> fit_method(const LongitudinalDataset& train, std::string_view label,
                                      const ReemOptions& opts);

/// Scores a fitted method on a simulated pair (original response scale).
EvaluationReport score_method(const Predictor& predictor, const SimulatedPair& pair, std::string_view label);

struct ExperimentConfig {
  /// Grid points; their `seed` fields are ignored.
  std::vector<SimulationConfig> grid;
  std::vector<std::string> methods;
  std::size_t reps = 1;
  std::uint64_t master_seed = 1;
  /// Controls shared by all fitted methods (folds, tolerance, grow...).
  ReemOptions base;
  std::size_t jobs = 1;
  /// Called once per finished (grid point, replication), possibly from a
  /// worker thread; calls are serialized.
  std::function<void(const std::string&)> progress;
};

struct ResultRow {
  std::string scenario;
  std::size_t I = 0;
  std::size_t T = 0;
  double sigma = 0.0;
  double sigma_eps2 = 0.0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::string method;
  /// Fit status, "ok" for non-iterative methods, "error" for a failed fit.
  std::string status;
  double pmse = 0.0;
  double emse_fixed = 0.0;
  std::optional<double> re_pmse;
  std::optional<double> sigma12_emse;
  std::vector<bool> recovered;
  std::string message;

  bool failed() const { return status == "error"; }
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

/// Data seed of a (grid point, replication); shared by every method.
std::uint64_t data_seed(std::uint64_t master, std::size_t grid_index, std::size_t rep);
/// Seed handed to the fitting routines of a (grid point, replication).
std::uint64_t fit_seed(std::uint64_t master, std::size_t grid_index, std::size_t rep);

/// Runs every method on every replication of every grid point. A failing
/// fit yields an "error" row instead of aborting.
ResultTable run_experiment(const ExperimentConfig& cfg);

void write_results_csv(const ResultTable& table, std::ostream& out);
/// Throws DataError on a malformed table.
ResultTable read_results_csv(std::istream& in);

/// Mean of each metric per (grid point, method), failures excluded.
void write_aggregate_csv(const ResultTable& table, std::ostream& out);

/// Writes pmse.csv, emse_fixed.csv, re_pmse.csv, sigma12_emse.csv and
/// recovery.csv into `out_dir` in long format. uniREEM recovery appears as
/// one row per response, labelled uniREEM[j].
void write_report(const ResultTable& table, const std::string& out_dir);

}  // namespace mvreem
