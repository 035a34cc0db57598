#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sgles/simd.hpp"

using namespace sgles::simd;

namespace {

std::vector<double> rnd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return s > 0 ? m / s : m;
}

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree") {
  const KernelTable* fast = avx2_kernels();
  if (fast == nullptr) {
    MESSAGE("AVX2 kernels unavailable; equivalence test skipped");
    return;
  }
  const KernelTable& ref = scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 33u, 1000u}) {
    const auto x = rnd(n, 1 + n), y0 = rnd(n, 100 + n);
    auto y_ref = y0, y_fast = y0;
    ref.axpy_f64(n, 0.37, x.data(), y_ref.data());
    fast->axpy_f64(n, 0.37, x.data(), y_fast.data());
    CHECK(max_rel(y_fast, y_ref) <= 1e-15);

    const double d_ref = ref.dot_f64(n, x.data(), y0.data());
    const double d_fast = fast->dot_f64(n, x.data(), y0.data());
    CHECK(std::abs(d_fast - d_ref) <= 1e-13 * (1.0 + std::abs(d_ref)));

    std::vector<float> xf(x.begin(), x.end()), yf(y0.begin(), y0.end());
    auto yf_ref = yf, yf_fast = yf;
    ref.axpy_f32(n, 0.37f, xf.data(), yf_ref.data());
    fast->axpy_f32(n, 0.37f, xf.data(), yf_fast.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(yf_ref[i] - yf_fast[i]) <= 1e-6f);
    const double df_ref = ref.dot_f32(n, xf.data(), yf.data());
    const double df_fast = fast->dot_f32(n, xf.data(), yf.data());
    CHECK(std::abs(df_fast - df_ref) <= 1e-13 * (1.0 + std::abs(df_ref)));
  }
}

TEST_CASE("scalar and AVX2 gather products agree") {
  const KernelTable* fast = avx2_kernels();
  if (fast == nullptr) return;
  const KernelTable& ref = scalar_kernels();
  for (auto [n, taps, k, m] : {std::array<std::size_t, 4>{1, 1, 1, 1}, {7, 3, 2, 24}, {64, 25, 24, 24},
                               {33, 25, 24, 2}, {9, 2, 5, 19}, {16, 1, 50, 13}, {5, 4, 3, 37}}) {
    const auto a = rnd(n * k, n + 7 * k), b = rnd(taps * k * m, k + 3 * m), bt = rnd(n * m, m + 11);
    std::mt19937_64 rng(n * 31 + taps);
    std::vector<std::uint32_t> rows(taps * n);
    for (auto& r : rows) r = static_cast<std::uint32_t>(rng() % n);

    auto c_ref = rnd(n * m, 5), c_fast = c_ref;
    ref.conv_gather(n, taps, k, m, a.data(), rows.data(), b.data(), c_ref.data());
    fast->conv_gather(n, taps, k, m, a.data(), rows.data(), b.data(), c_fast.data());
    CHECK(max_rel(c_fast, c_ref) <= 1e-13);

    for (const std::uint32_t* ar : {static_cast<const std::uint32_t*>(nullptr), static_cast<const std::uint32_t*>(rows.data())}) {
      auto w_ref = rnd(k * m, 6), w_fast = w_ref;
      ref.gemm_tn_rows(n, k, m, a.data(), ar, bt.data(), w_ref.data());
      fast->gemm_tn_rows(n, k, m, a.data(), ar, bt.data(), w_fast.data());
      CHECK(max_rel(w_fast, w_ref) <= 1e-13);
    }
  }
}

TEST_CASE("gather products match plain loops") {
  const std::size_t n = 6, taps = 2, k = 4, m = 5;
  const auto a = rnd(n * k, 1), b = rnd(taps * k * m, 2);
  const std::vector<std::uint32_t> rows{5, 0, 3, 1, 4, 2, 0, 0, 1, 1, 2, 2};
  std::vector<double> c(n * m, 0.0), expect(n * m, 0.0);
  scalar_kernels().conv_gather(n, taps, k, m, a.data(), rows.data(), b.data(), c.data());
  for (std::size_t t = 0; t < taps; ++t)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t r = 0; r < k; ++r) expect[i * m + j] += a[rows[t * n + i] * k + r] * b[(t * k + r) * m + j];
  CHECK(max_rel(c, expect) <= 1e-15);

  std::vector<double> w(k * m, 0.0), wexp(k * m, 0.0);
  scalar_kernels().gemm_tn_rows(n, k, m, a.data(), rows.data(), c.data(), w.data());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t j = 0; j < m; ++j) wexp[r * m + j] += a[rows[i] * k + r] * c[i * m + j];
  CHECK(max_rel(w, wexp) <= 1e-15);
}

TEST_CASE("backend selection") {
  const Backend before = active_backend();
  select_backend(Backend::scalar);
  CHECK(active_backend() == Backend::scalar);
  if (avx2_kernels() != nullptr) {
    select_backend(Backend::avx2);
    CHECK(active_backend() == Backend::avx2);
  } else {
    CHECK_THROWS(select_backend(Backend::avx2));
  }
  select_backend(before);
}
