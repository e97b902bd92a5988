#include <immintrin.h>

#include "mvreem/simd/kernels.hpp"

namespace mvreem::simd::avx2 {

void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out) {
  double base = 0.0;
  for (std::size_t j = 0; j < responses; ++j) base = base + (totals[j] * totals[j]) * inv_all;
  const __m256d vbase = _mm256_set1_pd(base);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d il = _mm256_loadu_pd(inv_left + i);
    const __m256d ir = _mm256_loadu_pd(inv_right + i);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < responses; ++j) {
      const __m256d p = _mm256_loadu_pd(prefix + j * n + i);
      const __m256d r = _mm256_sub_pd(_mm256_set1_pd(totals[j]), p);
      const __m256d left = _mm256_mul_pd(_mm256_mul_pd(p, p), il);
      const __m256d right = _mm256_mul_pd(_mm256_mul_pd(r, r), ir);
      acc = _mm256_add_pd(acc, _mm256_add_pd(left, right));
    }
    _mm256_storeu_pd(out + i, _mm256_sub_pd(acc, vbase));
  }
  for (std::size_t i = body; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < responses; ++j) {
      const double p = prefix[j * n + i];
      const double r = totals[j] - p;
      acc = acc + ((p * p) * inv_left[i] + (r * r) * inv_right[i]);
    }
    out[i] = acc - base;
  }
}

double sum_squared_diff(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  alignas(32) double s[4];
  _mm256_store_pd(s, acc);
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (std::size_t i = body; i < n; ++i) {
    const double d = a[i] - b[i];
    total = total + d * d;
  }
  return total;
}

}  // namespace mvreem::simd::avx2
