#include "mvreem/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "mvreem/csv.hpp"
#include "mvreem/error.hpp"

namespace mvreem {

std::optional<std::size_t> LongitudinalDataset::find_object(std::string_view id) const {
  const auto it = std::lower_bound(objects.begin(), objects.end(), id,
                                   [](const ObjectBlock& b, std::string_view v) { return b.id < v; });
  if (it != objects.end() && it->id == id) return static_cast<std::size_t>(it - objects.begin());
  // Datasets built by hand may not be id-sorted.
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> LongitudinalDataset::row_objects() const {
  std::vector<std::size_t> out(rows());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t r = 0; r < objects[i].count; ++r) out[objects[i].begin + r] = i;
  }
  return out;
}

void LongitudinalDataset::validate() const {
  const auto n = rows();
  if (Y.cols() < 1) throw DataError("dataset needs at least one response");
  if (X.cols() < 1) throw DataError("dataset needs at least one predictor");
  if (Z.cols() < 1) throw DataError("dataset needs at least one design column");
  if (static_cast<std::size_t>(X.rows()) != n || static_cast<std::size_t>(Z.rows()) != n) {
    throw DataError("response, predictor and design blocks differ in row count");
  }
  if (response_names.size() != responses() || predictor_names.size() != predictors() ||
      design_names.size() != design_columns()) {
    throw DataError("column names do not match block widths");
  }
  if (!time_labels.empty() && time_labels.size() != n) throw DataError("time labels do not match rows");
  std::set<std::string_view> ids;
  std::size_t expected = 0;
  for (const auto& o : objects) {
    if (o.count == 0) throw DataError("object " + o.id + " has no rows");
    if (o.begin != expected) throw DataError("object blocks are not contiguous");
    if (!ids.insert(o.id).second) throw DataError("duplicate object id " + o.id);
    expected += o.count;
  }
  if (expected != n) throw DataError("object blocks do not cover all rows");
  if (!Y.allFinite()) throw DataError("responses contain missing or non-finite values");
  if (!Z.allFinite()) throw DataError("design columns contain missing or non-finite values");
}

LongitudinalDataset LongitudinalDataset::with_response(std::size_t j) const {
  LongitudinalDataset out = *this;
  out.Y = Y.col(static_cast<Eigen::Index>(j));
  out.response_names = {response_names.at(j)};
  return out;
}

DatasetBuilder::DatasetBuilder(std::vector<std::string> response_names,
                               std::vector<std::string> predictor_names,
                               std::vector<std::string> design_names)
    : response_names_(std::move(response_names)),
      predictor_names_(std::move(predictor_names)),
      design_names_(std::move(design_names)) {}

void DatasetBuilder::add_row(std::string object_id, std::string time_label, double time_key,
                             std::span<const double> y, std::span<const double> x,
                             std::span<const double> z) {
  if (y.size() != response_names_.size() || x.size() != predictor_names_.size() ||
      z.size() != design_names_.size()) {
    throw DataError("row width does not match the dataset schema");
  }
  pending_.push_back({std::move(object_id), std::move(time_label), time_key, pending_.size()});
  y_.insert(y_.end(), y.begin(), y.end());
  x_.insert(x_.end(), x.begin(), x.end());
  z_.insert(z_.end(), z.begin(), z.end());
}

LongitudinalDataset DatasetBuilder::build() && {
  std::stable_sort(pending_.begin(), pending_.end(), [](const PendingRow& a, const PendingRow& b) {
    if (a.object != b.object) return a.object < b.object;
    return a.time_key < b.time_key;
  });
  const auto n = static_cast<Eigen::Index>(pending_.size());
  const auto J = static_cast<Eigen::Index>(response_names_.size());
  const auto k = static_cast<Eigen::Index>(predictor_names_.size());
  const auto q = static_cast<Eigen::Index>(design_names_.size());
  LongitudinalDataset ds;
  ds.response_names = std::move(response_names_);
  ds.predictor_names = std::move(predictor_names_);
  ds.design_names = std::move(design_names_);
  ds.Y.resize(n, J);
  ds.X.resize(n, k);
  ds.Z.resize(n, q);
  ds.time_labels.reserve(pending_.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& p = pending_[static_cast<std::size_t>(r)];
    if (r > 0) {
      const auto& prev = pending_[static_cast<std::size_t>(r - 1)];
      if (prev.object == p.object && prev.time_key == p.time_key) {
        throw DataError("duplicate (object, time) key (" + p.object + ", " + p.time_label + ")");
      }
    }
    if (ds.objects.empty() || ds.objects.back().id != p.object) {
      ds.objects.push_back({p.object, static_cast<std::size_t>(r), 0});
    }
    ++ds.objects.back().count;
    ds.time_labels.push_back(p.time_label);
    for (Eigen::Index j = 0; j < J; ++j) ds.Y(r, j) = y_[p.slot * J + j];
    for (Eigen::Index j = 0; j < k; ++j) ds.X(r, j) = x_[p.slot * k + j];
    for (Eigen::Index j = 0; j < q; ++j) ds.Z(r, j) = z_[p.slot * q + j];
  }
  return ds;
}

LongitudinalDataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles) {
  if (roles.responses.empty()) throw DataError("at least one response column is required");
  if (roles.predictors.empty()) throw DataError("at least one predictor column is required");
  const auto obj_col = table.column(roles.object);
  const auto time_col = table.column(roles.time);
  std::vector<std::size_t> ycols, xcols, zcols;
  for (const auto& c : roles.responses) ycols.push_back(table.column(c));
  for (const auto& c : roles.predictors) xcols.push_back(table.column(c));
  for (const auto& c : roles.design) zcols.push_back(table.column(c));

  // Numeric time keys when every time cell parses, otherwise lexicographic rank.
  std::vector<double> time_keys(table.rows.size());
  bool numeric_time = true;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cell = table.rows[r][time_col];
    if (is_missing_cell(cell)) {
      throw DataError("time missing at row " + std::to_string(r + 2));
    }
    if (!parse_double(cell, time_keys[r])) numeric_time = false;
  }
  if (!numeric_time) {
    std::vector<std::string> labels;
    for (const auto& row : table.rows) labels.push_back(row[time_col]);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      time_keys[r] = static_cast<double>(
          std::lower_bound(labels.begin(), labels.end(), table.rows[r][time_col]) - labels.begin());
    }
  }

  std::vector<std::string> design_names = roles.design;
  if (design_names.empty()) design_names.push_back("(Intercept)");
  DatasetBuilder builder(roles.responses, roles.predictors, design_names);
  std::vector<double> y(ycols.size()), x(xcols.size()), z(design_names.size(), 1.0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto& obj = row[obj_col];
    const auto& t = row[time_col];
    if (is_missing_cell(obj)) throw DataError("object id missing at row " + std::to_string(r + 2));
    const auto where = "(" + obj + "," + t + ")";
    for (std::size_t j = 0; j < ycols.size(); ++j) {
      const auto& cell = row[ycols[j]];
      if (is_missing_cell(cell)) throw DataError("response missing at " + where + " in column " + roles.responses[j]);
      if (!parse_double(cell, y[j])) {
        throw DataError("non-numeric response at " + where + " in column " + roles.responses[j]);
      }
    }
    for (std::size_t j = 0; j < xcols.size(); ++j) {
      const auto& cell = row[xcols[j]];
      if (is_missing_cell(cell)) {
        x[j] = kMissing;
      } else if (!parse_double(cell, x[j])) {
        throw DataError("non-numeric predictor at " + where + " in column " + roles.predictors[j]);
      }
    }
    for (std::size_t j = 0; j < zcols.size(); ++j) {
      const auto& cell = row[zcols[j]];
      if (is_missing_cell(cell) || !parse_double(cell, z[j])) {
        throw DataError("design value missing or non-numeric at " + where + " in column " + roles.design[j]);
      }
    }
    builder.add_row(obj, t, time_keys[r], y, x, z);
  }
  auto ds = std::move(builder).build();
  if (ds.rows() == 0) throw DataError("dataset has no rows");
  ds.validate();
  return ds;
}

LongitudinalDataset load_csv(const std::string& path, const ColumnRoles& roles) {
  return dataset_from_table(read_csv(path), roles);
}

std::string_view to_string(Standardization s) {
  switch (s) {
    case Standardization::none: return "none";
    case Standardization::marg: return "marg";
    case Standardization::cov: return "cov";
  }
  return "none";
}

Standardization parse_standardization(std::string_view s) {
  if (s == "none") return Standardization::none;
  if (s == "marg") return Standardization::marg;
  if (s == "cov") return Standardization::cov;
  throw ArgumentError("unknown standardization: " + std::string(s));
}

StandardizationTransform StandardizationTransform::identity(std::size_t responses) {
  const auto J = static_cast<Eigen::Index>(responses);
  StandardizationTransform tf;
  tf.method = Standardization::none;
  tf.mean = Eigen::VectorXd::Zero(J);
  tf.scale = Eigen::VectorXd::Ones(J);
  tf.whiten = Eigen::MatrixXd::Identity(J, J);
  tf.unwhiten = Eigen::MatrixXd::Identity(J, J);
  return tf;
}

Eigen::VectorXd StandardizationTransform::forward(const Eigen::VectorXd& y) const {
  switch (method) {
    case Standardization::none: return y;
    case Standardization::marg: return ((y - mean).array() / scale.array()).matrix();
    case Standardization::cov: return whiten * (y - mean);
  }
  return y;
}

Eigen::VectorXd StandardizationTransform::inverse(const Eigen::VectorXd& v) const {
  switch (method) {
    case Standardization::none: return v;
    case Standardization::marg: return (v.array() * scale.array()).matrix() + mean;
    case Standardization::cov: return unwhiten * v + mean;
  }
  return v;
}

Eigen::MatrixXd StandardizationTransform::forward_rows(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) out.row(r) = forward(y.row(r).transpose()).transpose();
  return out;
}

Eigen::MatrixXd StandardizationTransform::inverse_rows(const Eigen::MatrixXd& v) const {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) out.row(r) = inverse(v.row(r).transpose()).transpose();
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw DataError("covariance needs at least two rows");
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);
}

Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(1e-12);
  return eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

StandardizedData standardize(const LongitudinalDataset& ds, Standardization method) {
  const auto J = static_cast<Eigen::Index>(ds.responses());
  StandardizedData out{ds, StandardizationTransform::identity(ds.responses())};
  out.transform.method = method;
  if (method == Standardization::none) return out;
  if (ds.rows() < 2) throw DataError("standardization needs at least two rows");
  const Eigen::VectorXd mean = ds.Y.colwise().mean().transpose();
  const Eigen::MatrixXd cov = sample_covariance(ds.Y);
  out.transform.mean = mean;
  if (method == Standardization::marg) {
    Eigen::VectorXd sd(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      sd(j) = std::sqrt(cov(j, j));
      if (!(sd(j) > 0.0)) {
        throw DataError("response " + ds.response_names[static_cast<std::size_t>(j)] + " has zero variance");
      }
    }
    out.transform.scale = sd;
    out.transform.whiten = sd.cwiseInverse().asDiagonal();
    out.transform.unwhiten = sd.asDiagonal();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, lmax))) {
      throw DataError("response covariance is singular");
    }
    out.transform.scale = cov.diagonal().cwiseSqrt();
    out.transform.whiten = inverse_sqrt_spd(cov);
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(1e-12);
    out.transform.unwhiten =
        eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  }
  out.data.Y = out.transform.forward_rows(ds.Y);
  return out;
}

Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& values, const StandardizationTransform& tf) {
  if (values.cols() != tf.mean.size()) throw ArgumentError("inverse_transform: response count mismatch");
  return tf.inverse_rows(values);
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::gaussian_identity: return "gaussian";
    case Family::bernoulli_logit: return "bernoulli";
    case Family::poisson_log: return "poisson";
  }
  return "gaussian";
}

Family parse_family(std::string_view s) {
  if (s == "gaussian" || s == "gaussian_identity") return Family::gaussian_identity;
  if (s == "bernoulli" || s == "bernoulli_logit") return Family::bernoulli_logit;
  if (s == "poisson" || s == "poisson_log") return Family::poisson_log;
  throw ArgumentError("unknown family: " + std::string(s));
}

double mean_function(Family f, double eta) {
  switch (f) {
    case Family::gaussian_identity: return eta;
    case Family::bernoulli_logit: return 1.0 / (1.0 + std::exp(-eta));
    case Family::poisson_log: return std::exp(eta);
  }
  return eta;
}

double mean_derivative(Family f, double eta) {
  switch (f) {
    case Family::gaussian_identity: return 1.0;
    case Family::bernoulli_logit: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      return p * (1.0 - p);
    }
    case Family::poisson_log: return std::exp(eta);
  }
  return 1.0;
}

double link_function(Family f, double mu) {
  switch (f) {
    case Family::gaussian_identity: return mu;
    case Family::bernoulli_logit: return std::log(mu / (1.0 - mu));
    case Family::poisson_log: return std::log(mu);
  }
  return mu;
}

void check_family_domain(Family f, double y) {
  switch (f) {
    case Family::gaussian_identity: return;
    case Family::bernoulli_logit:
      if (y != 0.0 && y != 1.0) throw DataError("bernoulli response must be 0 or 1, got " + format_double(y));
      return;
    case Family::poisson_log:
      if (y < 0.0 || y != std::floor(y)) {
        throw DataError("poisson response must be a non-negative integer, got " + format_double(y));
      }
      return;
  }
}

}  // namespace mvreem

namespace mvreem {

void write_dataset_csv(const LongitudinalDataset& ds, std::ostream& out) {
  out << "object,time";
  for (const auto* names : {&ds.response_names, &ds.predictor_names, &ds.design_names}) {
    for (const auto& n : *names) out << ',' << csv_escape(n);
  }
  out << '\n';
  for (const auto& o : ds.objects) {
    for (std::size_t t = 0; t < o.count; ++t) {
      const auto r = static_cast<Eigen::Index>(o.begin + t);
      out << csv_escape(o.id) << ',' << csv_escape(ds.time_labels[static_cast<std::size_t>(r)]);
      for (const auto* m : {&ds.Y, &ds.X, &ds.Z}) {
        for (Eigen::Index c = 0; c < m->cols(); ++c) out << ',' << format_double((*m)(r, c));
      }
      out << '\n';
    }
  }
}

}  // namespace mvreem
