#include "mvreem/simd/kernels.hpp"

namespace mvreem::simd::scalar {

void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out) {
  double base = 0.0;
  for (std::size_t j = 0; j < responses; ++j) base = base + (totals[j] * totals[j]) * inv_all;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < responses; ++j) {
      const double p = prefix[j * n + i];
      const double r = totals[j] - p;
      const double left = (p * p) * inv_left[i];
      const double right = (r * r) * inv_right[i];
      acc = acc + (left + right);
    }
    out[i] = acc - base;
  }
}

double sum_squared_diff(const double* a, const double* b, std::size_t n) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double d = a[i + l] - b[i + l];
      s[l] = s[l] + d * d;
    }
  }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (std::size_t i = body; i < n; ++i) {
    const double d = a[i] - b[i];
    total = total + d * d;
  }
  return total;
}

}  // namespace mvreem::simd::scalar
