#include "simd_impl.hpp"

namespace sgles::simd::detail {

namespace {

void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double dot_f32(std::size_t n, const float* x, const float* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

void conv_gather(std::size_t n, std::size_t taps, std::size_t k, std::size_t m, const double* a,
                 const std::uint32_t* rows, const double* b, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    for (std::size_t t = 0; t < taps; ++t) {
      const double* ai = a + static_cast<std::size_t>(rows[t * n + i]) * k;
      const double* bt = b + t * k * m;
      for (std::size_t r = 0; r < k; ++r) {
        const double x = ai[r];
        const double* br = bt + r * m;
        for (std::size_t j = 0; j < m; ++j) ci[j] += x * br[j];
      }
    }
  }
}

void gemm_tn_rows(std::size_t n, std::size_t k, std::size_t m, const double* a, const std::uint32_t* ar,
                  const double* b, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + (ar ? ar[i] : i) * k;
    const double* bi = b + i * m;
    for (std::size_t r = 0; r < k; ++r) {
      const double x = ai[r];
      double* cr = c + r * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += x * bi[j];
    }
  }
}

}  // namespace

const KernelTable kScalarTable{
    Backend::scalar, axpy_f64, axpy_f32, dot_f64, dot_f32, conv_gather, gemm_tn_rows,
};

}  // namespace sgles::simd::detail
