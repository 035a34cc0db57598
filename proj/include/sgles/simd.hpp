#pragma once

// Data-parallel inner kernels with a scalar reference implementation and an
// AVX2/FMA implementation selected at runtime.
//
// The scalar table is the reference: every AVX2 kernel must agree with it to
// rounding (reassociation + fused multiply-add), which tests/unit/test_simd.cpp
// checks. Selection order: SGLES_SIMD environment variable ("scalar" or
// "avx2"), then CPU detection.

#include <cstddef>
#include <cstdint>
#include <span>

namespace sgles::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  // y += a * x
  void (*axpy_f64)(std::size_t n, double a, const double* x, double* y);
  void (*axpy_f32)(std::size_t n, float a, const float* x, float* y);
  // sum x*y, accumulated in double
  double (*dot_f64)(std::size_t n, const double* x, const double* y);
  double (*dot_f32)(std::size_t n, const float* x, const float* y);
  // Tap-fused gather product used by the convolution layers. All matrices
  // are row-major.
  // C[i, :] += sum_t A[rows[t * n + i], :] * B_t     A: * x k, B_t: k x m (stacked), i < n
  void (*conv_gather)(std::size_t n, std::size_t taps, std::size_t k, std::size_t m, const double* a,
                      const std::uint32_t* rows, const double* b, double* c);
  // C += sum_i A[ar[i], :]^T B[i, :]      C: k x m; ar may be null (identity)
  void (*gemm_tn_rows)(std::size_t n, std::size_t k, std::size_t m, const double* a, const std::uint32_t* ar,
                       const double* b, double* c);
};

const KernelTable& scalar_kernels();
// nullptr when the AVX2 variant is not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();
bool cpu_supports_avx2();

const KernelTable& kernels();
Backend active_backend();
// Throws ConfigError when the requested backend is unavailable.
void select_backend(Backend backend);
const char* backend_name(Backend backend);

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy_f64(y.size(), a, x.data(), y.data());
}
inline void axpy(float a, std::span<const float> x, std::span<float> y) {
  kernels().axpy_f32(y.size(), a, x.data(), y.data());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return kernels().dot_f64(x.size(), x.data(), y.data());
}
inline double dot(std::span<const float> x, std::span<const float> y) {
  return kernels().dot_f32(x.size(), x.data(), y.data());
}

}  // namespace sgles::simd
