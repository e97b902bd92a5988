#pragma once

// Data-parallel inner loops of the tree code. Every kernel has a scalar
// reference and optional vector variants; all variants use the same
// operation order so their results are bit-identical.

#include <cstddef>
#include <string_view>

namespace mvreem::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Impurity decrease of every candidate split position of one predictor.
///
/// `prefix` holds `responses` blocks of length `n`: block j, entry i is the
/// sum of (centered) response j over the first i+1 sorted rows. `totals[j]`
/// is the sum over all rows. For every position i,
///   out[i] = sum_j (P_j[i]^2 * inv_left[i] + (S_j - P_j[i])^2 * inv_right[i])
///            - sum_j S_j^2 * inv_all.
using SplitGainsFn = void (*)(const double* prefix, std::size_t n, std::size_t responses,
                              const double* totals, const double* inv_left,
                              const double* inv_right, double inv_all, double* out);

/// sum_i (a[i] - b[i])^2, accumulated in four interleaved partial sums
/// combined as (s0 + s1) + (s2 + s3), then the tail in order.
using SumSquaredDiffFn = double (*)(const double* a, const double* b, std::size_t n);

struct KernelTable {
  Isa isa;
  SplitGainsFn split_gains;
  SumSquaredDiffFn sum_squared_diff;
};

/// Active kernel table. Chosen on first use from the CPU features; the
/// environment variable MVREEM_ISA=scalar forces the reference kernels.
const KernelTable& kernels();

bool isa_supported(Isa isa);
Isa best_supported_isa();

/// Switches the active table; throws ArgumentError if the ISA is unavailable.
void select_isa(Isa isa);

/// Table for a given ISA without activating it (for equivalence tests).
const KernelTable& table_for(Isa isa);

namespace scalar {
void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out);
double sum_squared_diff(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(MVREEM_HAVE_AVX2)
namespace avx2 {
void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out);
double sum_squared_diff(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

#if defined(MVREEM_HAVE_NEON)
namespace neon {
void split_gains(const double* prefix, std::size_t n, std::size_t responses, const double* totals,
                 const double* inv_left, const double* inv_right, double inv_all, double* out);
double sum_squared_diff(const double* a, const double* b, std::size_t n);
}  // namespace neon
#endif

}  // namespace mvreem::simd
