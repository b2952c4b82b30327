// Compiled with -mavx2 -mfma. Nothing in here may run before
// cpu_supports_avx2() has been checked by the dispatcher.

#include <immintrin.h>

#include <cmath>

#include "stan/kernels.hpp"

namespace stan::kernels {
namespace {

// Every C element is the FMA chain c = fma(a[i,p], b[p,j], c) for p = 0..k-1,
// whether it lands in a vector lane or in the scalar column tail. Results are
// therefore independent of the row/column blocking.
template <int Rows>
inline void gemm_rows(std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc, bool accumulate) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc0[Rows];
    __m256d acc1[Rows];
    for (int r = 0; r < Rows; ++r) {
      if (accumulate) {
        acc0[r] = _mm256_loadu_pd(c + r * ldc + j);
        acc1[r] = _mm256_loadu_pd(c + r * ldc + j + 4);
      } else {
        acc0[r] = _mm256_setzero_pd();
        acc1[r] = _mm256_setzero_pd();
      }
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d b0 = _mm256_loadu_pd(b + p * ldb + j);
      const __m256d b1 = _mm256_loadu_pd(b + p * ldb + j + 4);
      for (int r = 0; r < Rows; ++r) {
        const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
        acc0[r] = _mm256_fmadd_pd(av, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_pd(av, b1, acc1[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) {
      _mm256_storeu_pd(c + r * ldc + j, acc0[r]);
      _mm256_storeu_pd(c + r * ldc + j + 4, acc1[r]);
    }
  }
  for (; j + 4 <= n; j += 4) {
    __m256d acc[Rows];
    for (int r = 0; r < Rows; ++r) {
      acc[r] = accumulate ? _mm256_loadu_pd(c + r * ldc + j)
                          : _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
      for (int r = 0; r < Rows; ++r) {
        acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * lda + p), bv,
                                 acc[r]);
      }
    }
    for (int r = 0; r < Rows; ++r) _mm256_storeu_pd(c + r * ldc + j, acc[r]);
  }
  for (; j < n; ++j) {
    for (int r = 0; r < Rows; ++r) {
      double s = accumulate ? c[r * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        s = std::fma(a[r * lda + p], b[p * ldb + j], s);
      }
      c[r * ldc + j] = s;
    }
  }
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    gemm_rows<4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  }
  for (; i < m; ++i) {
    gemm_rows<1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  }
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Backend::Avx2, &gemm_avx2, &dot_avx2,
                                 &axpy_avx2};
  return &table;
}

}  // namespace stan::kernels
