#include "mvreem/serialize.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mvreem/error.hpp"

namespace mvreem {
namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix size mismatch in model file");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

std::string name_of(const std::vector<std::string>& names, std::size_t i) {
  return i < names.size() ? names[i] : "x" + std::to_string(i + 1);
}

json tree_json(const MultivariateTree& tree, const std::vector<std::string>& names) {
  json nodes = json::array();
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& n = tree.nodes()[i];
    json node = {{"id", i},
                 {"depth", n.depth},
                 {"count", n.count},
                 {"impurity", n.impurity},
                 {"mean", vector_json(n.mean)}};
    if (n.split) {
      const auto& s = *n.split;
      json sur = json::array();
      for (const auto& r : s.surrogates) {
        sur.push_back({{"predictor", r.predictor},
                       {"name", name_of(names, r.predictor)},
                       {"threshold", r.threshold},
                       {"agreement", r.agreement},
                       {"left_when_le", r.left_when_le}});
      }
      node["split"] = {{"predictor", s.predictor},
                       {"name", name_of(names, s.predictor)},
                       {"threshold", s.threshold},
                       {"majority_left", s.majority_left},
                       {"surrogates", sur}};
      node["left"] = n.left;
      node["right"] = n.right;
    }
    nodes.push_back(std::move(node));
  }
  return {{"responses", tree.responses()}, {"complexity_trace", tree.complexity_trace}, {"nodes", nodes}};
}

MultivariateTree tree_from(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    TreeNode n;
    n.depth = jn.at("depth").get<std::size_t>();
    n.count = jn.at("count").get<std::size_t>();
    n.impurity = jn.at("impurity").get<double>();
    n.mean = vector_from(jn.at("mean"));
    if (jn.contains("split")) {
      const auto& js = jn.at("split");
      SplitRule s;
      s.predictor = js.at("predictor").get<std::size_t>();
      s.threshold = js.at("threshold").get<double>();
      s.majority_left = js.at("majority_left").get<bool>();
      for (const auto& jr : js.at("surrogates")) {
        SurrogateRule r;
        r.predictor = jr.at("predictor").get<std::size_t>();
        r.threshold = jr.at("threshold").get<double>();
        r.agreement = jr.at("agreement").get<double>();
        r.left_when_le = jr.at("left_when_le").get<bool>();
        s.surrogates.push_back(r);
      }
      n.split = std::move(s);
      n.left = jn.at("left").get<int>();
      n.right = jn.at("right").get<int>();
    }
    nodes.push_back(std::move(n));
  }
  MultivariateTree tree(std::move(nodes), j.at("responses").get<std::size_t>());
  tree.complexity_trace = j.at("complexity_trace").get<std::vector<double>>();
  return tree;
}

json options_json(const ReemOptions& o) {
  return {{"standardization", to_string(o.standardization)},
          {"selection", to_string(o.selection)},
          {"folds", o.folds},
          {"object_folds", o.object_folds},
          {"tolerance", o.tolerance},
          {"max_iterations", o.max_iterations},
          {"grow",
           {{"minsplit", o.grow.minsplit},
            {"minbucket", o.grow.minbucket},
            {"cp", o.grow.cp},
            {"maxdepth", o.grow.maxdepth},
            {"max_surrogates", o.grow.max_surrogates}}},
          {"family", to_string(o.family)},
          {"residual", to_string(o.residual)},
          {"random_effects", o.random_effects},
          {"optimizer", {{"rel_tol", o.optimizer.rel_tol}, {"max_iter", o.optimizer.max_iter}}},
          {"seed", o.seed}};
}

ReemOptions options_from(const json& j) {
  ReemOptions o;
  o.standardization = parse_standardization(j.at("standardization").get<std::string>());
  o.selection = parse_selection(j.at("selection").get<std::string>());
  o.folds = j.at("folds").get<std::size_t>();
  o.object_folds = j.at("object_folds").get<bool>();
  o.tolerance = j.at("tolerance").get<double>();
  o.max_iterations = j.at("max_iterations").get<int>();
  const auto& g = j.at("grow");
  o.grow.minsplit = g.at("minsplit").get<std::size_t>();
  o.grow.minbucket = g.at("minbucket").get<std::size_t>();
  o.grow.cp = g.at("cp").get<double>();
  o.grow.maxdepth = g.at("maxdepth").get<std::size_t>();
  o.grow.max_surrogates = g.at("max_surrogates").get<std::size_t>();
  o.family = parse_family(j.at("family").get<std::string>());
  o.residual = parse_residual_structure(j.at("residual").get<std::string>());
  o.random_effects = j.at("random_effects").get<bool>();
  o.optimizer.rel_tol = j.at("optimizer").at("rel_tol").get<double>();
  o.optimizer.max_iter = j.at("optimizer").at("max_iter").get<int>();
  o.seed = j.at("seed").get<std::uint64_t>();
  return o;
}

json transform_json(const StandardizationTransform& t) {
  return {{"method", to_string(t.method)},
          {"mean", vector_json(t.mean)},
          {"scale", vector_json(t.scale)},
          {"whiten", matrix_json(t.whiten)},
          {"unwhiten", matrix_json(t.unwhiten)}};
}

StandardizationTransform transform_from(const json& j) {
  StandardizationTransform t;
  t.method = parse_standardization(j.at("method").get<std::string>());
  t.mean = vector_from(j.at("mean"));
  t.scale = vector_from(j.at("scale"));
  t.whiten = matrix_from(j.at("whiten"));
  t.unwhiten = matrix_from(j.at("unwhiten"));
  return t;
}

json model_json(const ReemModel& m) {
  json objects = json::array();
  for (std::size_t i = 0; i < m.mixed.object_ids.size(); ++i) {
    objects.push_back({{"id", m.mixed.object_ids[i]}, {"B", matrix_json(m.mixed.B[i])}});
  }
  json trace = json::array();
  for (const auto& t : m.trace) {
    trace.push_back({{"log_likelihood", t.log_likelihood}, {"leaves", t.leaves}, {"structure", t.structure}});
  }
  return {{"schema_version", kModelSchemaVersion},
          {"options", options_json(m.options)},
          {"responses", m.response_names},
          {"predictors", m.predictor_names},
          {"design", m.design_names},
          {"transform", transform_json(m.transform)},
          {"tree", tree_json(m.tree, m.predictor_names)},
          {"mixed",
           {{"M", matrix_json(m.mixed.M)},
            {"D", matrix_json(m.mixed.D)},
            {"Sigma", matrix_json(m.mixed.Sigma)},
            {"objects", objects},
            {"log_likelihood", m.mixed.log_likelihood},
            {"initial_log_likelihood", m.mixed.initial_log_likelihood},
            {"converged", m.mixed.converged},
            {"iterations", m.mixed.iterations},
            {"trace", m.mixed.trace}}},
          {"trace", trace},
          {"status", to_string(m.status)},
          {"eta_clamped", m.eta_clamped}};
}

ReemModel model_from(const json& j) {
  if (j.at("schema_version").get<int>() != kModelSchemaVersion) throw DataError("unsupported model schema version");
  ReemModel m;
  m.options = options_from(j.at("options"));
  m.response_names = j.at("responses").get<std::vector<std::string>>();
  m.predictor_names = j.at("predictors").get<std::vector<std::string>>();
  m.design_names = j.at("design").get<std::vector<std::string>>();
  m.transform = transform_from(j.at("transform"));
  m.tree = tree_from(j.at("tree"));
  const auto& mx = j.at("mixed");
  m.mixed.M = matrix_from(mx.at("M"));
  m.mixed.D = matrix_from(mx.at("D"));
  m.mixed.Sigma = matrix_from(mx.at("Sigma"));
  for (const auto& o : mx.at("objects")) {
    m.mixed.object_ids.push_back(o.at("id").get<std::string>());
    m.mixed.B.push_back(matrix_from(o.at("B")));
  }
  m.mixed.log_likelihood = mx.at("log_likelihood").get<double>();
  m.mixed.initial_log_likelihood = mx.at("initial_log_likelihood").get<double>();
  m.mixed.converged = mx.at("converged").get<bool>();
  m.mixed.iterations = mx.at("iterations").get<int>();
  m.mixed.trace = mx.at("trace").get<std::vector<double>>();
  for (const auto& t : j.at("trace")) {
    m.trace.push_back({t.at("log_likelihood").get<double>(), t.at("leaves").get<std::size_t>(),
                       t.at("structure").get<std::string>()});
  }
  m.status = parse_fit_status(j.at("status").get<std::string>());
  m.eta_clamped = j.at("eta_clamped").get<bool>();
  if (m.tree.leaf_count() != static_cast<std::size_t>(m.mixed.M.cols()) ||
      m.response_names.size() != static_cast<std::size_t>(m.mixed.M.rows())) {
    throw DataError("model file is inconsistent: tree and leaf-mean matrix disagree");
  }
  return m;
}

}  // namespace

std::string serialize_model(const ReemModel& model) { return model_json(model).dump(2) + "\n"; }

ReemModel parse_model(const std::string& text) {
  try {
    return model_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ReemModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << serialize_model(model);
  if (!out) throw DataError("cannot write " + path);
}

ReemModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_tree(const MultivariateTree& tree, const std::vector<std::string>& predictor_names) {
  return tree_json(tree, predictor_names).dump(2);
}

}  // namespace mvreem
