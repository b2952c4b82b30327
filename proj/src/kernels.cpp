#include "stan/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace stan::kernels {

#ifndef STAN_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_supports_avx2() {
#if defined(STAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
#else
  return false;
#endif
}

namespace {

const KernelTable* pick_initial() {
  const char* env = std::getenv("STAN_KERNELS");
  if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
  if (cpu_supports_avx2()) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_initial()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_backend(Backend backend) {
  if (backend == Backend::Scalar) {
    slot().store(&scalar_table(), std::memory_order_release);
    return;
  }
  if (!cpu_supports_avx2()) {
    throw std::invalid_argument("AVX2 kernels are not available on this CPU");
  }
  slot().store(avx2_table(), std::memory_order_release);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

}  // namespace stan::kernels
