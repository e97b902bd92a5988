#include "mvreem/evalmetrics.hpp"

#include <map>

#include "mvreem/error.hpp"
#include "mvreem/simd/kernels.hpp"

namespace mvreem {
namespace {

double scaled_sse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::size_t objects, std::size_t per_object) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ArgumentError("prediction and truth shapes differ");
  if (objects == 0 || per_object == 0) throw ArgumentError("need at least one object and one test row");
  if (static_cast<std::size_t>(a.rows()) != objects * per_object) {
    throw ArgumentError("expected " + std::to_string(objects * per_object) + " test rows, got " +
                        std::to_string(a.rows()));
  }
  const double sse = simd::kernels().sum_squared_diff(a.data(), b.data(), static_cast<std::size_t>(a.size()));
  return sse / static_cast<double>(objects * per_object);
}

}  // namespace

double pmse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& truth, std::size_t objects,
            std::size_t test_rows_per_object) {
  return scaled_sse(predictions, truth, objects, test_rows_per_object);
}

double emse_fixed(const Eigen::MatrixXd& fixed_predictions, const Eigen::MatrixXd& true_fixed, std::size_t objects,
                  std::size_t test_rows_per_object) {
  return scaled_sse(fixed_predictions, true_fixed, objects, test_rows_per_object);
}

double re_pmse(const ObjectEffects& estimated, const ObjectEffects& truth) {
  if (estimated.size() != truth.size()) throw ArgumentError("random-effect object sets differ in size");
  if (truth.empty()) throw ArgumentError("no objects to compare");
  std::map<std::string, const Eigen::MatrixXd*> est;
  for (const auto& [id, B] : estimated) est[id] = &B;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [id, B] : truth) {
    const auto it = est.find(id);
    if (it == est.end()) throw ArgumentError("object " + id + " has no estimated random effect");
    if (it->second->rows() != B.rows() || it->second->cols() != B.cols()) {
      throw ArgumentError("random-effect shape mismatch for object " + id);
    }
    sum += (*it->second - B).squaredNorm();
    count += static_cast<std::size_t>(B.size());
  }
  return sum / static_cast<double>(count);
}

double sigma12_emse(const Eigen::MatrixXd& D_hat, double sigma12_true) {
  if (D_hat.rows() < 2 || D_hat.cols() < 2) throw ArgumentError("sigma12 needs at least two responses");
  const double d = D_hat(0, 1) - sigma12_true;
  return d * d;
}

double recovery_rate(const std::vector<const MultivariateTree*>& fitted, const MultivariateTree& truth) {
  if (fitted.empty()) throw ArgumentError("recovery rate needs at least one tree");
  std::size_t hits = 0;
  for (const auto* t : fitted) hits += structure_equal(*t, truth) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(fitted.size());
}

}  // namespace mvreem
