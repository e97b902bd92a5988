#include <arm_neon.h>

#include "mvreem/simd/kernels.hpp"

namespace mvreem::simd::neon {

void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out) {
  double base = 0.0;
  for (std::size_t j = 0; j < responses; ++j) base = base + (totals[j] * totals[j]) * inv_all;
  const float64x2_t vbase = vdupq_n_f64(base);
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    const float64x2_t il = vld1q_f64(inv_left + i);
    const float64x2_t ir = vld1q_f64(inv_right + i);
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < responses; ++j) {
      const float64x2_t p = vld1q_f64(prefix + j * n + i);
      const float64x2_t r = vsubq_f64(vdupq_n_f64(totals[j]), p);
      const float64x2_t left = vmulq_f64(vmulq_f64(p, p), il);
      const float64x2_t right = vmulq_f64(vmulq_f64(r, r), ir);
      acc = vaddq_f64(acc, vaddq_f64(left, right));
    }
    vst1q_f64(out + i, vsubq_f64(acc, vbase));
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
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    lo = vaddq_f64(lo, vmulq_f64(d0, d0));
    hi = vaddq_f64(hi, vmulq_f64(d1, d1));
  }
  double total = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
                 (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (std::size_t i = body; i < n; ++i) {
    const double d = a[i] - b[i];
    total = total + d * d;
  }
  return total;
}

}  // namespace mvreem::simd::neon
