// Compiled with -O3 -mavx2 -mfma (the register tiles rely on full unrolling);
// only reached after a runtime CPU check.
#include <immintrin.h>

#include "simd_impl.hpp"

namespace sgles::simd::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double dot_f32(std::size_t n, const float* x, const float* y) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 vx = _mm256_loadu_ps(x + i);
    const __m256 vy = _mm256_loadu_ps(y + i);
    s0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(vx)),
                         _mm256_cvtps_pd(_mm256_castps256_ps128(vy)), s0);
    s1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(vx, 1)),
                         _mm256_cvtps_pd(_mm256_extractf128_ps(vy, 1)), s1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

// Register tile: CB output rows by NV vectors of columns, streamed over
// every tap and input channel so the accumulators are loaded once.
template <int CB, int NV>
inline void conv_tile(std::size_t n, std::size_t taps, std::size_t k, std::size_t m, const double* a,
                      const std::uint32_t* rows, const double* b, double* c, std::size_t i0, std::size_t j0) {
  __m256d acc[CB][NV];
  for (int i = 0; i < CB; ++i) {
    for (int v = 0; v < NV; ++v) acc[i][v] = _mm256_loadu_pd(c + (i0 + i) * m + j0 + 4 * v);
  }
  for (std::size_t t = 0; t < taps; ++t) {
    const double* arow[CB];
    for (int i = 0; i < CB; ++i) arow[i] = a + static_cast<std::size_t>(rows[t * n + i0 + i]) * k;
    const double* bt = b + t * k * m + j0;
    for (std::size_t r = 0; r < k; ++r) {
      __m256d bv[NV];
      for (int v = 0; v < NV; ++v) bv[v] = _mm256_loadu_pd(bt + r * m + 4 * v);
      for (int i = 0; i < CB; ++i) {
        const __m256d x = _mm256_broadcast_sd(arow[i] + r);
        for (int v = 0; v < NV; ++v) acc[i][v] = _mm256_fmadd_pd(x, bv[v], acc[i][v]);
      }
    }
  }
  for (int i = 0; i < CB; ++i) {
    for (int v = 0; v < NV; ++v) _mm256_storeu_pd(c + (i0 + i) * m + j0 + 4 * v, acc[i][v]);
  }
}

template <int CB>
void conv_row_block(std::size_t n, std::size_t taps, std::size_t k, std::size_t m, const double* a,
                    const std::uint32_t* rows, const double* b, double* c, std::size_t i0) {
  std::size_t j = 0;
  for (; j + 12 <= m; j += 12) conv_tile<CB, 3>(n, taps, k, m, a, rows, b, c, i0, j);
  for (; j + 4 <= m; j += 4) conv_tile<CB, 1>(n, taps, k, m, a, rows, b, c, i0, j);
  for (; j < m; ++j) {
    for (int i = 0; i < CB; ++i) {
      double s = c[(i0 + i) * m + j];
      for (std::size_t t = 0; t < taps; ++t) {
        const double* ai = a + static_cast<std::size_t>(rows[t * n + i0 + i]) * k;
        for (std::size_t r = 0; r < k; ++r) s += ai[r] * b[(t * k + r) * m + j];
      }
      c[(i0 + i) * m + j] = s;
    }
  }
}

void conv_gather(std::size_t n, std::size_t taps, std::size_t k, std::size_t m, const double* a,
                 const std::uint32_t* rows, const double* b, double* c) {
  constexpr int CB = 4;
  std::size_t i = 0;
  for (; i + CB <= n; i += CB) conv_row_block<CB>(n, taps, k, m, a, rows, b, c, i);
  for (; i < n; ++i) conv_row_block<1>(n, taps, k, m, a, rows, b, c, i);
}

template <int RB, int NV>
inline void gemm_tn_tile(std::size_t n, std::size_t k, std::size_t m, const double* a, const std::uint32_t* ar,
                         const double* b, double* c, std::size_t r0, std::size_t j0) {
  __m256d acc[RB][NV];
  for (int r = 0; r < RB; ++r) {
    for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_loadu_pd(c + (r0 + r) * m + j0 + 4 * v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + (ar ? ar[i] : i) * k + r0;
    __m256d bv[NV];
    for (int v = 0; v < NV; ++v) bv[v] = _mm256_loadu_pd(b + i * m + j0 + 4 * v);
    for (int r = 0; r < RB; ++r) {
      const __m256d x = _mm256_broadcast_sd(ai + r);
      for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_fmadd_pd(x, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < RB; ++r) {
    for (int v = 0; v < NV; ++v) _mm256_storeu_pd(c + (r0 + r) * m + j0 + 4 * v, acc[r][v]);
  }
}

template <int RB>
void gemm_tn_rows_block(std::size_t n, std::size_t k, std::size_t m, const double* a, const std::uint32_t* ar,
                        const double* b, double* c, std::size_t r0) {
  std::size_t j = 0;
  for (; j + 12 <= m; j += 12) gemm_tn_tile<RB, 3>(n, k, m, a, ar, b, c, r0, j);
  for (; j + 4 <= m; j += 4) gemm_tn_tile<RB, 1>(n, k, m, a, ar, b, c, r0, j);
  for (; j < m; ++j) {
    for (int r = 0; r < RB; ++r) {
      double s = c[(r0 + r) * m + j];
      for (std::size_t i = 0; i < n; ++i) s += a[(ar ? ar[i] : i) * k + r0 + r] * b[i * m + j];
      c[(r0 + r) * m + j] = s;
    }
  }
}

void gemm_tn_rows(std::size_t n, std::size_t k, std::size_t m, const double* a, const std::uint32_t* ar,
                  const double* b, double* c) {
  std::size_t r = 0;
  for (; r + 4 <= k; r += 4) gemm_tn_rows_block<4>(n, k, m, a, ar, b, c, r);
  for (; r < k; ++r) gemm_tn_rows_block<1>(n, k, m, a, ar, b, c, r);
}

}  // namespace

const KernelTable kAvx2Table{
    Backend::avx2, axpy_f64, axpy_f32, dot_f64, dot_f32, conv_gather, gemm_tn_rows,
};

}  // namespace sgles::simd::detail
