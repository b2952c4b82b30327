#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "stan/kernels.hpp"
#include "stan/nn.hpp"

namespace stan {
namespace {

using kernels::Backend;

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

class BackendGuard {
 public:
  BackendGuard() : saved_(kernels::active_backend()) {}
  ~BackendGuard() { kernels::set_backend(saved_); }

 private:
  Backend saved_;
};

bool have_avx2() { return kernels::avx2_table() != nullptr && kernels::cpu_supports_avx2(); }

TEST(Kernels, ScalarGemmMatchesNaiveTripleLoop) {
  Rng rng(RngSeed{11});
  const std::size_t m = 5, n = 7, k = 3;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  std::vector<double> c(m * n, 0.0);
  kernels::scalar_table().gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      EXPECT_DOUBLE_EQ(c[i * n + j], s);
    }
  }
}

TEST(Kernels, GemmAccumulateAddsIntoExistingValues) {
  const std::vector<double> a{1, 2};
  const std::vector<double> b{3, 4};
  std::vector<double> c{10};
  kernels::scalar_table().gemm(1, 1, 2, a.data(), 2, b.data(), 1, c.data(), 1, true);
  EXPECT_DOUBLE_EQ(c[0], 21.0);
}

TEST(Kernels, GemmHonoursLeadingDimensions) {
  // 2×2 views inside 2×3 storage.
  const std::vector<double> a{1, 2, 99, 3, 4, 99};
  const std::vector<double> b{1, 0, 99, 0, 1, 99};
  std::vector<double> c(6, -1.0);
  kernels::scalar_table().gemm(2, 2, 2, a.data(), 3, b.data(), 3, c.data(), 3, false);
  EXPECT_EQ(c, (std::vector<double>{1, 2, -1, 3, 4, -1}));
}

TEST(Kernels, Avx2AgreesWithScalarAcrossShapes) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 unavailable";
  const auto& ref = kernels::scalar_table();
  const auto& fast = *kernels::avx2_table();
  Rng rng(RngSeed{12});
  for (std::size_t m : {1, 3, 4, 5, 9}) {
    for (std::size_t n : {1, 3, 4, 7, 8, 12, 17}) {
      for (std::size_t k : {1, 2, 8, 33}) {
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(k * n, rng);
        auto c0 = random_vec(m * n, rng);
        auto c1 = c0;
        for (bool acc : {false, true}) {
          ref.gemm(m, n, k, a.data(), k, b.data(), n, c0.data(), n, acc);
          fast.gemm(m, n, k, a.data(), k, b.data(), n, c1.data(), n, acc);
          for (std::size_t i = 0; i < c0.size(); ++i) {
            // Each element is a k-term sum of products bounded by 4.
            EXPECT_NEAR(c0[i], c1[i], 1e-14 * 8.0 * static_cast<double>(k + 2))
                << m << "x" << n << "x" << k;
          }
        }
      }
    }
  }
}

TEST(Kernels, Avx2DotAndAxpyAgreeWithScalar) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 unavailable";
  const auto& ref = kernels::scalar_table();
  const auto& fast = *kernels::avx2_table();
  Rng rng(RngSeed{13});
  for (std::size_t n : {0, 1, 3, 4, 5, 8, 31, 64}) {
    const auto x = random_vec(n, rng);
    const auto y = random_vec(n, rng);
    EXPECT_NEAR(ref.dot(n, x.data(), y.data()), fast.dot(n, x.data(), y.data()),
                1e-13 * static_cast<double>(n + 1));
    auto y0 = y;
    auto y1 = y;
    ref.axpy(n, 0.37, x.data(), y0.data());
    fast.axpy(n, 0.37, x.data(), y1.data());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y0[i], y1[i], 1e-15);
  }
}

TEST(Kernels, Avx2GemmIsIndependentOfBlocking) {
  if (!have_avx2()) GTEST_SKIP() << "AVX2 unavailable";
  const auto& fast = *kernels::avx2_table();
  Rng rng(RngSeed{14});
  const std::size_t m = 9, n = 13, k = 21;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  std::vector<double> full(m * n);
  fast.gemm(m, n, k, a.data(), k, b.data(), n, full.data(), n, false);
  // Row r alone, column j alone: lands in a different block and lane.
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double single = 0.0;
      fast.gemm(1, 1, k, a.data() + r * k, k, b.data() + j, n, &single, 1, false);
      EXPECT_EQ(single, full[r * n + j]);
    }
  }
}

TEST(Kernels, SetBackendSwitchesActiveTable) {
  BackendGuard guard;
  kernels::set_backend(Backend::Scalar);
  EXPECT_EQ(kernels::active_backend(), Backend::Scalar);
  EXPECT_EQ(&kernels::active(), &kernels::scalar_table());
  if (have_avx2()) {
    kernels::set_backend(Backend::Avx2);
    EXPECT_EQ(kernels::active_backend(), Backend::Avx2);
  } else {
    EXPECT_THROW(kernels::set_backend(Backend::Avx2), std::invalid_argument);
  }
}

TEST(Kernels, BackendNames) {
  EXPECT_EQ(kernels::backend_name(Backend::Scalar), "scalar");
  EXPECT_EQ(kernels::backend_name(Backend::Avx2), "avx2");
}

}  // namespace
}  // namespace stan
