#include <atomic>
#include <cstdlib>
#include <string>

#include "mvreem/error.hpp"
#include "mvreem/simd/kernels.hpp"

namespace mvreem::simd {
namespace {

const KernelTable kScalar{Isa::scalar, &scalar::split_gains, &scalar::sum_squared_diff};
#if defined(MVREEM_HAVE_AVX2)
const KernelTable kAvx2{Isa::avx2, &avx2::split_gains, &avx2::sum_squared_diff};
#endif
#if defined(MVREEM_HAVE_NEON)
const KernelTable kNeon{Isa::neon, &neon::split_gains, &neon::sum_squared_diff};
#endif

const KernelTable* initial_table() {
  if (const char* forced = std::getenv("MVREEM_ISA")) {
    if (std::string(forced) == "scalar") return &kScalar;
  }
  return &table_for(best_supported_isa());
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(MVREEM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::neon:
#if defined(MVREEM_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa best_supported_isa() {
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw ArgumentError("instruction set not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(MVREEM_HAVE_AVX2)
    case Isa::avx2: return kAvx2;
#endif
#if defined(MVREEM_HAVE_NEON)
    case Isa::neon: return kNeon;
#endif
    default: return kScalar;
  }
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void select_isa(Isa isa) { active().store(&table_for(isa), std::memory_order_release); }

}  // namespace mvreem::simd
