#include <doctest.h>

#include <cstring>
#include <vector>

#include "mvreem/error.hpp"
#include "mvreem/random.hpp"
#include "mvreem/simd/kernels.hpp"

using namespace mvreem;

namespace {

std::vector<simd::Isa> vector_isas() {
  std::vector<simd::Isa> out;
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (simd::isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("scalar kernels are always available") {
  CHECK(simd::isa_supported(simd::Isa::scalar));
  CHECK(simd::table_for(simd::Isa::scalar).isa == simd::Isa::scalar);
  CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
}

TEST_CASE("split gains match the formula") {
  // two responses, three positions
  const std::vector<double> prefix = {1, 3, 2, -1, 0, 4};
  const std::vector<double> totals = {5, 6};
  const std::vector<double> il = {1.0, 0.5, 1.0 / 3};
  const std::vector<double> ir = {1.0 / 3, 0.5, 1.0};
  std::vector<double> out(3);
  simd::scalar::split_gains(prefix.data(), 3, 2, totals.data(), il.data(), ir.data(), 0.25, out.data());
  for (std::size_t i = 0; i < 3; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double p = prefix[j * 3 + i];
      want += p * p * il[i] + (totals[j] - p) * (totals[j] - p) * ir[i];
    }
    want -= (25.0 + 36.0) * 0.25;
    CHECK(out[i] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("vector split gains are bit-identical to scalar") {
  Rng rng(91);
  for (auto isa : vector_isas()) {
    const auto& tab = simd::table_for(isa);
    for (std::size_t n : {1, 2, 3, 4, 5, 7, 8, 9, 16, 31, 64, 101}) {
      for (std::size_t J : {1, 2, 3, 5}) {
        std::vector<double> prefix(n * J), totals(J), il(n), ir(n);
        for (auto& v : prefix) v = rng.normal() * 10;
        for (auto& v : totals) v = rng.normal() * 10;
        for (std::size_t i = 0; i < n; ++i) {
          il[i] = 1.0 / static_cast<double>(i + 1);
          ir[i] = 1.0 / static_cast<double>(n + 1 - i);
        }
        std::vector<double> a(n), b(n);
        simd::scalar::split_gains(prefix.data(), n, J, totals.data(), il.data(), ir.data(), 0.01, a.data());
        tab.split_gains(prefix.data(), n, J, totals.data(), il.data(), ir.data(), 0.01, b.data());
        for (std::size_t i = 0; i < n; ++i) REQUIRE(same_bits(a[i], b[i]));
      }
    }
  }
}

TEST_CASE("vector squared-error reduction is bit-identical to scalar") {
  Rng rng(17);
  for (auto isa : vector_isas()) {
    const auto& tab = simd::table_for(isa);
    for (std::size_t n = 0; n < 70; ++n) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal() * 1e3;
        b[i] = rng.normal();
      }
      REQUIRE(same_bits(simd::scalar::sum_squared_diff(a.data(), b.data(), n),
                        tab.sum_squared_diff(a.data(), b.data(), n)));
    }
  }
}

TEST_CASE("squared-error reduction") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {0, 0, 0, 0, 0};
  CHECK(simd::scalar::sum_squared_diff(a.data(), b.data(), 5) == 55.0);
  CHECK(simd::scalar::sum_squared_diff(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("select_isa switches and rejects unavailable sets") {
  const auto before = simd::kernels().isa;
  simd::select_isa(simd::Isa::scalar);
  CHECK(simd::kernels().isa == simd::Isa::scalar);
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon}) {
    if (!simd::isa_supported(isa)) CHECK_THROWS_AS(simd::select_isa(isa), ArgumentError);
  }
  simd::select_isa(before);
  CHECK(simd::kernels().isa == before);
}
