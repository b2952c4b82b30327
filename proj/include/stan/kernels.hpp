#pragma once

// Dense double-precision inner loops behind every tensor operation.
//
// Two implementations exist: a portable scalar reference and an AVX2/FMA
// variant. The active one is picked once at startup from the CPU feature
// bits; STAN_KERNELS=scalar|avx2 in the environment or set_backend()
// overrides the choice. Both produce results that agree to rounding, and
// within one backend every output element is reduced in the same order no
// matter which row or column block it falls into.

#include <cstddef>
#include <string_view>

namespace stan::kernels {

enum class Backend { Scalar, Avx2 };

/// C[m×n] (+)= A[m×k] · B[k×n], all row-major with explicit leading dims.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda, const double* b,
                        std::size_t ldb, double* c, std::size_t ldc,
                        bool accumulate);
using DotFn = double (*)(std::size_t n, const double* x, const double* y);
/// y += alpha · x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x,
                        double* y);

struct KernelTable {
  Backend backend;
  GemmFn gemm;
  DotFn dot;
  AxpyFn axpy;
};

const KernelTable& scalar_table();

/// Returns nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports_avx2();

const KernelTable& active();
Backend active_backend();

/// Throws std::invalid_argument if the backend is unavailable on this CPU.
void set_backend(Backend backend);

std::string_view backend_name(Backend backend);

}  // namespace stan::kernels
