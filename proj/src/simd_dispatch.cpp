#include <atomic>
#include <cstdlib>
#include <string_view>

#include "sgles/error.hpp"
#include "simd_impl.hpp"

namespace sgles::simd {

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

const KernelTable* avx2_kernels() {
#if defined(SGLES_HAVE_AVX2)
  static const bool ok = cpu_supports_avx2();
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("SGLES_SIMD")) {
    const std::string_view v(env);
    if (v == "scalar") return &scalar_kernels();
    if (v == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

Backend active_backend() { return kernels().backend; }

void select_backend(Backend backend) {
  if (backend == Backend::scalar) {
    active().store(&scalar_kernels());
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) throw ConfigError("AVX2 kernels are not available on this machine");
  active().store(t);
}

const char* backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace sgles::simd
