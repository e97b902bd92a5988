#include "mvreem/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "mvreem/csv.hpp"
#include "mvreem/error.hpp"

namespace mvreem {

const std::vector<std::string>& method_labels() {
  static const std::vector<std::string> labels{"multiREEM_min_marg", "multiREEM_1se_marg", "multiREEM_min_cov",
                                               "multiREEM_1se_cov",  "uniREEM",            "multitree",
                                               "unilme",             "multilme"};
  return labels;
}

bool is_method_label(std::string_view label) {
  for (const auto& l : method_labels()) {
    if (l == label) return true;
  }
  return false;
}

std::unique_ptr<Predictor> fit_method(const LongitudinalDataset& train, std::string_view label,
                                      const ReemOptions& opts) {
  constexpr std::string_view prefix = "multiREEM_";
  if (label.starts_with(prefix)) {
    const auto rest = label.substr(prefix.size());
    const auto cut = rest.find('_');
    if (cut == std::string_view::npos) throw ArgumentError("unknown method label: " + std::string(label));
    ReemOptions o = opts;
    o.selection = parse_selection(rest.substr(0, cut));
    o.standardization = parse_standardization(rest.substr(cut + 1));
    return std::make_unique<ReemPredictor>(fit_reem(train, o));
  }
  ReemOptions o = opts;
  o.selection = SelectionRule::min;
  o.standardization = Standardization::marg;
  if (label == "uniREEM") return fit_baseline(train, BaselineMethod::uniREEM, o);
  if (label == "multitree") return fit_baseline(train, BaselineMethod::multitree, o);
  if (label == "unilme") return fit_baseline(train, BaselineMethod::unilme, opts);
  if (label == "multilme") return fit_baseline(train, BaselineMethod::multilme, opts);
  throw ArgumentError("unknown method label: " + std::string(label));
}

EvaluationReport score_method(const Predictor& predictor, const SimulatedPair& pair, std::string_view label) {
  const auto& test = pair.test;
  const auto n = static_cast<Eigen::Index>(test.rows());
  const auto J = static_cast<Eigen::Index>(test.responses());
  Eigen::MatrixXd full(n, J), fixed(n, J);
  std::vector<double> x(test.predictors()), z(test.design_columns());
  for (const auto& o : test.objects) {
    for (std::size_t t = 0; t < o.count; ++t) {
      const auto r = static_cast<Eigen::Index>(o.begin + t);
      for (std::size_t c = 0; c < x.size(); ++c) x[c] = test.X(r, static_cast<Eigen::Index>(c));
      for (std::size_t c = 0; c < z.size(); ++c) z[c] = test.Z(r, static_cast<Eigen::Index>(c));
      full.row(r) = predictor.predict(x, z, o.id).transpose();
      fixed.row(r) = predictor.predict(x, z, std::nullopt).transpose();
    }
  }
  EvaluationReport rep;
  rep.method = std::string(label);
  const std::size_t I = test.objects.size();
  const std::size_t per = I == 0 ? 0 : test.rows() / I;
  rep.pmse = pmse(full, test.Y, I, per);
  rep.emse_fixed = emse_fixed(fixed, pair.test_fixed, I, per);

  ObjectEffects est;
  bool have_all = true;
  for (const auto& [id, B] : pair.truth.B) {
    auto b = predictor.random_effect(id);
    if (!b) {
      have_all = false;
      break;
    }
    est.emplace_back(id, std::move(*b));
  }
  if (have_all) rep.re_pmse = re_pmse(est, pair.truth.B);
  if (J >= 2 && test.design_columns() == 1) {
    if (auto D = predictor.random_effect_covariance()) rep.sigma12_emse = sigma12_emse(*D, pair.truth.D(0, 1));
  }
  for (const auto* tree : predictor.trees()) {
    if (tree->responses() == pair.truth.tree.responses()) {
      rep.recovered.push_back(structure_equal(*tree, pair.truth.tree));
    } else {
      // Univariate trees are compared on shape and split variables only.
      rep.recovered.push_back(structure_signature(*tree) == structure_signature(pair.truth.tree));
    }
  }
  return rep;
}

std::uint64_t data_seed(std::uint64_t master, std::size_t grid_index, std::size_t rep) {
  return derive_seed(master, grid_index, rep, 0u);
}

std::uint64_t fit_seed(std::uint64_t master, std::size_t grid_index, std::size_t rep) {
  return derive_seed(master, grid_index, rep, 1u);
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  if (cfg.reps < 1) throw ArgumentError("reps must be at least 1");
  for (const auto& m : cfg.methods) {
    if (!is_method_label(m)) throw ArgumentError("unknown method label: " + m);
  }
  for (const auto& g : cfg.grid) g.validate();

  const std::size_t tasks = cfg.grid.size() * cfg.reps;
  std::vector<std::vector<ResultRow>> slots(tasks);
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  std::size_t done = 0;

  auto run_task = [&](std::size_t task) {
    const std::size_t g = task / cfg.reps;
    const std::size_t rep = task % cfg.reps;
    SimulationConfig sc = cfg.grid[g];
    sc.seed = data_seed(cfg.master_seed, g, rep);
    const SimulatedPair pair = generate_pair(sc);
    ReemOptions opts = cfg.base;
    opts.seed = fit_seed(cfg.master_seed, g, rep);
    for (const auto& method : cfg.methods) {
      ResultRow row;
      row.scenario = std::string(to_string(sc.scenario));
      row.I = sc.objects;
      row.T = sc.times;
      row.sigma = sc.scenario == Scenario::no_random_effect ? 0.0 : sc.sigma;
      row.sigma_eps2 = sc.sigma_eps2;
      row.rep = rep;
      row.seed = sc.seed;
      row.method = method;
      try {
        const auto predictor = fit_method(pair.train, method, opts);
        const auto report = score_method(*predictor, pair, method);
        row.status = "ok";
        if (const auto* rp = dynamic_cast<const ReemPredictor*>(predictor.get())) {
          row.status = std::string(to_string(rp->model().status));
        }
        row.pmse = report.pmse;
        row.emse_fixed = report.emse_fixed;
        row.re_pmse = report.re_pmse;
        row.sigma12_emse = report.sigma12_emse;
        row.recovered = report.recovered;
      } catch (const std::exception& e) {
        row.status = "error";
        row.message = e.what();
      }
      slots[task].push_back(std::move(row));
    }
    if (cfg.progress) {
      std::lock_guard lock(progress_mutex);
      ++done;
      cfg.progress("[" + std::to_string(done) + "/" + std::to_string(tasks) + "] " +
                   std::string(to_string(sc.scenario)) + " I=" + std::to_string(sc.objects) +
                   " T=" + std::to_string(sc.times) + " rep=" + std::to_string(rep));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.jobs, tasks));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_task(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) run_task(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  ResultTable table;
  for (auto& s : slots) {
    for (auto& r : s) table.rows.push_back(std::move(r));
  }
  return table;
}

namespace {

const std::vector<std::string> kResultColumns{"scenario", "I",      "T",          "sigma",   "sigma_eps2",
                                              "rep",      "seed",   "method",     "status",  "pmse",
                                              "emse_fixed", "re_pmse", "sigma12_emse", "recovered", "message"};

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::string recovered_cell(const std::vector<bool>& r) {
  if (r.empty()) return "NA";
  std::string s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) s += '|';
    s += r[i] ? '1' : '0';
  }
  return s;
}

std::string grid_cells(const ResultRow& r) {
  return csv_escape(r.scenario) + ',' + std::to_string(r.I) + ',' + std::to_string(r.T) + ',' +
         format_double(r.sigma) + ',' + format_double(r.sigma_eps2);
}

double number_cell(const std::string& cell, const char* column, std::size_t line) {
  double v;
  if (!parse_double(cell, v)) {
    throw DataError("results line " + std::to_string(line) + ": column " + column + " is not numeric: '" + cell + "'");
  }
  return v;
}

std::size_t count_cell(const std::string& cell, const char* column, std::size_t line) {
  const double v = number_cell(cell, column, line);
  if (v < 0 || v != std::floor(v)) {
    throw DataError("results line " + std::to_string(line) + ": column " + column + " must be a count");
  }
  return static_cast<std::size_t>(v);
}

std::optional<double> opt_number(const std::string& cell, const char* column, std::size_t line) {
  if (is_missing_cell(cell)) return std::nullopt;
  return number_cell(cell, column, line);
}

struct GroupKey {
  std::string scenario;
  std::size_t I, T;
  double sigma, sigma_eps2;
  std::string method;
  auto tie() const { return std::tie(scenario, I, T, sigma, sigma_eps2, method); }
  bool operator<(const GroupKey& o) const { return tie() < o.tie(); }
};

struct Group {
  GroupKey key;
  std::vector<const ResultRow*> rows;
};

/// Groups in order of first appearance.
std::vector<Group> group_rows(const ResultTable& table) {
  std::vector<Group> groups;
  std::map<GroupKey, std::size_t> index;
  for (const auto& r : table.rows) {
    GroupKey k{r.scenario, r.I, r.T, r.sigma, r.sigma_eps2, r.method};
    auto [it, inserted] = index.try_emplace(k, groups.size());
    if (inserted) groups.push_back({k, {}});
    groups[it->second].rows.push_back(&r);
  }
  return groups;
}

std::string key_cells(const GroupKey& k) {
  return csv_escape(k.scenario) + ',' + std::to_string(k.I) + ',' + std::to_string(k.T) + ',' +
         format_double(k.sigma) + ',' + format_double(k.sigma_eps2);
}

/// Mean over non-failed rows with a value; nullopt when there are none.
template <class Get>
std::pair<std::optional<double>, std::size_t> mean_of(const Group& g, Get get) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* r : g.rows) {
    if (r->failed()) continue;
    const std::optional<double> v = get(*r);
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return {std::nullopt, 0};
  return {sum / static_cast<double>(n), n};
}

/// Per-tree recovery rates of a group (one entry per response for uniREEM).
std::vector<std::pair<double, std::size_t>> recovery_rates(const Group& g) {
  std::vector<std::size_t> hits, counts;
  for (const auto* r : g.rows) {
    if (r->failed()) continue;
    if (hits.size() < r->recovered.size()) {
      hits.resize(r->recovered.size(), 0);
      counts.resize(r->recovered.size(), 0);
    }
    for (std::size_t i = 0; i < r->recovered.size(); ++i) {
      hits[i] += r->recovered[i] ? 1 : 0;
      counts[i] += 1;
    }
  }
  std::vector<std::pair<double, std::size_t>> out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    out.emplace_back(static_cast<double>(hits[i]) / static_cast<double>(counts[i]), counts[i]);
  }
  return out;
}

}  // namespace

void write_results_csv(const ResultTable& table, std::ostream& out) {
  for (std::size_t i = 0; i < kResultColumns.size(); ++i) out << (i ? "," : "") << kResultColumns[i];
  out << '\n';
  for (const auto& r : table.rows) {
    out << grid_cells(r) << ',' << r.rep << ',' << r.seed << ',' << csv_escape(r.method) << ','
        << csv_escape(r.status) << ',' << (r.failed() ? "NA" : format_double(r.pmse)) << ','
        << (r.failed() ? "NA" : format_double(r.emse_fixed)) << ',' << opt_cell(r.re_pmse) << ','
        << opt_cell(r.sigma12_emse) << ',' << recovered_cell(r.recovered) << ',' << csv_escape(r.message) << '\n';
  }
}

ResultTable read_results_csv(std::istream& in) {
  const CsvTable csv = parse_csv(in);
  std::vector<std::size_t> col;
  for (const auto& name : kResultColumns) col.push_back(csv.column(name));
  ResultTable table;
  std::size_t line = 1;
  for (const auto& cells : csv.rows) {
    ++line;
    if (cells.size() != csv.header.size()) {
      throw DataError("results line " + std::to_string(line) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(csv.header.size()));
    }
    auto cell = [&](std::size_t i) -> const std::string& { return cells[col[i]]; };
    ResultRow r;
    r.scenario = cell(0);
    r.I = count_cell(cell(1), "I", line);
    r.T = count_cell(cell(2), "T", line);
    r.sigma = number_cell(cell(3), "sigma", line);
    r.sigma_eps2 = number_cell(cell(4), "sigma_eps2", line);
    r.rep = count_cell(cell(5), "rep", line);
    try {
      std::size_t pos = 0;
      r.seed = std::stoull(cell(6), &pos);
      if (pos != cell(6).size()) throw std::invalid_argument("seed");
    } catch (const std::exception&) {
      throw DataError("results line " + std::to_string(line) + ": column seed is not an unsigned integer");
    }
    r.method = cell(7);
    r.status = cell(8);
    if (r.method.empty() || r.status.empty()) {
      throw DataError("results line " + std::to_string(line) + ": empty method or status");
    }
    if (!r.failed()) {
      r.pmse = number_cell(cell(9), "pmse", line);
      r.emse_fixed = number_cell(cell(10), "emse_fixed", line);
    }
    r.re_pmse = opt_number(cell(11), "re_pmse", line);
    r.sigma12_emse = opt_number(cell(12), "sigma12_emse", line);
    const std::string& rec = cell(13);
    if (!is_missing_cell(rec)) {
      for (std::size_t i = 0; i < rec.size(); ++i) {
        const char c = rec[i];
        if (i % 2 == 1) {
          if (c != '|') throw DataError("results line " + std::to_string(line) + ": malformed recovered cell");
          continue;
        }
        if (c != '0' && c != '1') throw DataError("results line " + std::to_string(line) + ": malformed recovered cell");
        r.recovered.push_back(c == '1');
      }
      if (rec.size() % 2 == 0) throw DataError("results line " + std::to_string(line) + ": malformed recovered cell");
    }
    r.message = cell(14);
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_aggregate_csv(const ResultTable& table, std::ostream& out) {
  out << "scenario,I,T,sigma,sigma_eps2,method,reps,failures,pmse,emse_fixed,re_pmse,sigma12_emse,recovery\n";
  for (const auto& g : group_rows(table)) {
    std::size_t failures = 0;
    for (const auto* r : g.rows) failures += r->failed() ? 1 : 0;
    const auto pm = mean_of(g, [](const ResultRow& r) { return std::optional<double>(r.pmse); }).first;
    const auto em = mean_of(g, [](const ResultRow& r) { return std::optional<double>(r.emse_fixed); }).first;
    const auto re = mean_of(g, [](const ResultRow& r) { return r.re_pmse; }).first;
    const auto s12 = mean_of(g, [](const ResultRow& r) { return r.sigma12_emse; }).first;
    std::string rec;
    const auto rates = recovery_rates(g);
    for (std::size_t i = 0; i < rates.size(); ++i) rec += (i ? "|" : "") + format_double(rates[i].first);
    if (rec.empty()) rec = "NA";
    out << key_cells(g.key) << ',' << csv_escape(g.key.method) << ',' << g.rows.size() << ',' << failures << ','
        << opt_cell(pm) << ',' << opt_cell(em) << ',' << opt_cell(re) << ',' << opt_cell(s12) << ',' << rec << '\n';
  }
}

void write_report(const ResultTable& table, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto groups = group_rows(table);
  const char* header = "scenario,I,T,sigma,sigma_eps2,method,n,value\n";
  auto open = [&](const std::string& name) {
    const auto path = std::filesystem::path(out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << header;
    return f;
  };
  auto emit_metric = [&](const std::string& name, auto get) {
    auto f = open(name);
    for (const auto& g : groups) {
      const auto [m, n] = mean_of(g, get);
      if (!m) continue;
      f << key_cells(g.key) << ',' << csv_escape(g.key.method) << ',' << n << ',' << format_double(*m) << '\n';
    }
  };
  emit_metric("pmse.csv", [](const ResultRow& r) { return std::optional<double>(r.pmse); });
  emit_metric("emse_fixed.csv", [](const ResultRow& r) { return std::optional<double>(r.emse_fixed); });
  emit_metric("re_pmse.csv", [](const ResultRow& r) { return r.re_pmse; });
  emit_metric("sigma12_emse.csv", [](const ResultRow& r) { return r.sigma12_emse; });

  auto f = open("recovery.csv");
  for (const auto& g : groups) {
    const auto rates = recovery_rates(g);
    if (rates.empty()) continue;
    if (rates.size() == 1 && g.key.method != "uniREEM") {
      f << key_cells(g.key) << ',' << csv_escape(g.key.method) << ',' << rates[0].second << ','
        << format_double(rates[0].first) << '\n';
      continue;
    }
    for (std::size_t j = 0; j < rates.size(); ++j) {
      f << key_cells(g.key) << ',' << csv_escape(g.key.method + "[" + std::to_string(j + 1) + "]") << ','
        << rates[j].second << ',' << format_double(rates[j].first) << '\n';
    }
  }
}

}  // namespace mvreem
