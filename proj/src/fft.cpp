#include "sgles/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace sgles::fft {

SpectralShape spectral_shape(const Grid& g) { return {g.n(0) / 2 + 1, g.n(1), g.n(2)}; }

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct Api;

template <>
struct Api<double> {
  using plan = fftw_plan;
  using cpx = fftw_complex;
  static void* alloc(std::size_t bytes) { return fftw_malloc(bytes); }
  static void release(void* p) { fftw_free(p); }
  static plan r2c(int rank, const int* n, double* in, cpx* out) {
    return fftw_plan_dft_r2c(rank, n, in, out, FFTW_ESTIMATE);
  }
  static plan c2r(int rank, const int* n, cpx* in, double* out) {
    return fftw_plan_dft_c2r(rank, n, in, out, FFTW_ESTIMATE);
  }
  static void run(plan p) { fftw_execute(p); }
  static void destroy(plan p) { fftw_destroy_plan(p); }
};

template <>
struct Api<float> {
  using plan = fftwf_plan;
  using cpx = fftwf_complex;
  static void* alloc(std::size_t bytes) { return fftwf_malloc(bytes); }
  static void release(void* p) { fftwf_free(p); }
  static plan r2c(int rank, const int* n, float* in, cpx* out) {
    return fftwf_plan_dft_r2c(rank, n, in, out, FFTW_ESTIMATE);
  }
  static plan c2r(int rank, const int* n, cpx* in, float* out) {
    return fftwf_plan_dft_c2r(rank, n, in, out, FFTW_ESTIMATE);
  }
  static void run(plan p) { fftwf_execute(p); }
  static void destroy(plan p) { fftwf_destroy_plan(p); }
};

template <class T>
class Plan {
 public:
  explicit Plan(const Grid& g) {
    using A = Api<T>;
    real_n_ = g.cell_count();
    cpx_n_ = spectral_shape(g).size();
    int dims[3];
    const int rank = g.dim();
    // FFTW wants the slowest axis first.
    for (int a = 0; a < rank; ++a) dims[a] = static_cast<int>(g.n(rank - 1 - a));
    real_ = static_cast<T*>(A::alloc(sizeof(T) * real_n_));
    cpx_ = static_cast<typename A::cpx*>(A::alloc(sizeof(typename A::cpx) * cpx_n_));
    if (real_ == nullptr || cpx_ == nullptr) throw NumericalError("FFT buffer allocation failed");
    std::lock_guard lock(planner_mutex());
    fwd_ = A::r2c(rank, dims, real_, cpx_);
    bwd_ = A::c2r(rank, dims, cpx_, real_);
    if (fwd_ == nullptr || bwd_ == nullptr) throw NumericalError("FFTW planning failed");
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    using A = Api<T>;
    std::lock_guard lock(planner_mutex());
    if (fwd_) A::destroy(fwd_);
    if (bwd_) A::destroy(bwd_);
    A::release(real_);
    A::release(cpx_);
  }

  void forward(std::span<const T> in, std::span<std::complex<T>> out) {
    std::copy(in.begin(), in.end(), real_);
    Api<T>::run(fwd_);
    std::memcpy(static_cast<void*>(out.data()), cpx_, sizeof(std::complex<T>) * cpx_n_);
  }
  void inverse(std::span<const std::complex<T>> in, std::span<T> out) {
    std::memcpy(static_cast<void*>(cpx_), in.data(), sizeof(std::complex<T>) * cpx_n_);
    Api<T>::run(bwd_);
    std::copy(real_, real_ + real_n_, out.begin());
  }

 private:
  std::size_t real_n_ = 0, cpx_n_ = 0;
  T* real_ = nullptr;
  typename Api<T>::cpx* cpx_ = nullptr;
  typename Api<T>::plan fwd_ = nullptr;
  typename Api<T>::plan bwd_ = nullptr;
};

template <class T>
Plan<T>& plan_for(const Grid& g) {
  using Key = std::tuple<int, std::int64_t, std::int64_t, std::int64_t>;
  thread_local std::map<Key, std::unique_ptr<Plan<T>>> cache;
  const Key key{g.dim(), g.n(0), g.n(1), g.n(2)};
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_unique<Plan<T>>(g)).first;
  return *it->second;
}

}  // namespace

template <class T>
void forward(const Grid& g, std::span<const T> in, std::span<std::complex<T>> out) {
  if (in.size() != g.cell_count() || out.size() != spectral_shape(g).size()) {
    throw ConfigError("fft::forward: buffer size mismatch");
  }
  plan_for<T>(g).forward(in, out);
}

template <class T>
void inverse(const Grid& g, std::span<const std::complex<T>> in, std::span<T> out) {
  if (out.size() != g.cell_count() || in.size() != spectral_shape(g).size()) {
    throw ConfigError("fft::inverse: buffer size mismatch");
  }
  plan_for<T>(g).inverse(in, out);
}

template void forward<float>(const Grid&, std::span<const float>, std::span<std::complex<float>>);
template void forward<double>(const Grid&, std::span<const double>, std::span<std::complex<double>>);
template void inverse<float>(const Grid&, std::span<const std::complex<float>>, std::span<float>);
template void inverse<double>(const Grid&, std::span<const std::complex<double>>, std::span<double>);

}  // namespace sgles::fft
