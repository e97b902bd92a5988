#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mvreem {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return v != v; }

/// Contiguous run of rows belonging to one object.
struct ObjectBlock {
  std::string id;
  std::size_t begin = 0;
  std::size_t count = 0;
};

/// Long-format panel. Rows are grouped by object (objects in id order) and
/// sorted by time within each object.
///
/// Y holds the J responses (never missing), X the k predictors (NaN marks a
/// missing cell) and Z the q random-effect design columns.
struct LongitudinalDataset {
  std::vector<std::string> response_names;
  std::vector<std::string> predictor_names;
  std::vector<std::string> design_names;
  std::vector<ObjectBlock> objects;
  std::vector<std::string> time_labels;
  Eigen::MatrixXd Y;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;

  std::size_t rows() const { return static_cast<std::size_t>(Y.rows()); }
  std::size_t responses() const { return static_cast<std::size_t>(Y.cols()); }
  std::size_t predictors() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t design_columns() const { return static_cast<std::size_t>(Z.cols()); }

  std::optional<std::size_t> find_object(std::string_view id) const;

  /// Object index of every row.
  std::vector<std::size_t> row_objects() const;

  /// Throws DataError when an invariant is violated.
  void validate() const;

  /// Copy with a single response column.
  LongitudinalDataset with_response(std::size_t j) const;
};

/// Accumulates rows in any order and produces a canonical dataset.
class DatasetBuilder {
 public:
  DatasetBuilder(std::vector<std::string> response_names, std::vector<std::string> predictor_names,
                 std::vector<std::string> design_names);

  void add_row(std::string object_id, std::string time_label, double time_key,
               std::span<const double> y, std::span<const double> x, std::span<const double> z);

  /// Sorts by (object id, time key); duplicate (object, time) keys are an error.
  LongitudinalDataset build() &&;

 private:
  struct PendingRow {
    std::string object;
    std::string time_label;
    double time_key;
    std::size_t slot;
  };
  std::vector<std::string> response_names_;
  std::vector<std::string> predictor_names_;
  std::vector<std::string> design_names_;
  std::vector<PendingRow> pending_;
  std::vector<double> y_;
  std::vector<double> x_;
  std::vector<double> z_;
};

/// Column roles for CSV ingestion. An empty `design` means a single
/// all-ones intercept column.
struct ColumnRoles {
  std::string object;
  std::string time;
  std::vector<std::string> responses;
  std::vector<std::string> predictors;
  std::vector<std::string> design;
};

LongitudinalDataset load_csv(const std::string& path, const ColumnRoles& roles);

struct CsvTable;
LongitudinalDataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles);

/// Writes the panel in long format with columns object, time, responses,
/// predictors and design (missing predictors as "NA").
void write_dataset_csv(const LongitudinalDataset& ds, std::ostream& out);

enum class Standardization { none, marg, cov };

std::string_view to_string(Standardization s);
Standardization parse_standardization(std::string_view s);

/// Affine response map v = A (y - m) fitted once on pooled rows.
struct StandardizationTransform {
  Standardization method = Standardization::none;
  Eigen::VectorXd mean;       // m; zero for `none`
  Eigen::VectorXd scale;      // per-response sd (marg)
  Eigen::MatrixXd whiten;     // A
  Eigen::MatrixXd unwhiten;   // A^{-1}

  static StandardizationTransform identity(std::size_t responses);

  Eigen::VectorXd forward(const Eigen::VectorXd& y) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& v) const;
  /// Row-wise maps over an (rows x J) block.
  Eigen::MatrixXd forward_rows(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd inverse_rows(const Eigen::MatrixXd& v) const;
};

struct StandardizedData {
  LongitudinalDataset data;
  StandardizationTransform transform;
};

StandardizedData standardize(const LongitudinalDataset& ds, Standardization method);

/// Maps standardized rows (rows x J) back to the original response scale.
Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& values, const StandardizationTransform& tf);

/// Symmetric inverse square root through the eigendecomposition; eigenvalues
/// are floored at 1e-12.
Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& a);

/// Pooled sample covariance with denominator n-1.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows);

enum class Family { gaussian_identity, bernoulli_logit, poisson_log };

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

/// Mean function h, its derivative, and the link h^{-1}.
double mean_function(Family f, double eta);
double mean_derivative(Family f, double eta);
double link_function(Family f, double mu);

/// Throws DataError when y lies outside the family's support.
void check_family_domain(Family f, double y);

}  // namespace mvreem
