#include "doctest.h"

#include <cmath>
#include <vector>

#include "distpre/kernels.hpp"
#include "distpre/rng.hpp"

using namespace distpre;
namespace k = distpre::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t key) {
  CounterRng rng(key);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct BackendGuard {
  k::Backend saved = k::active();
  ~BackendGuard() { k::select(saved); }
};

std::vector<k::Backend> simd_backends() {
  std::vector<k::Backend> out;
  for (auto b : {k::Backend::avx2, k::Backend::neon}) {
    if (k::supported(b)) out.push_back(b);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar dot and axpy match a plain loop exactly") {
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u}) {
    auto a = random_vec(n, 1 + n);
    auto b = random_vec(n, 100 + n);
    CHECK(k::scalar::dot(a.data(), b.data(), n) == naive_dot(a, b));
    auto y = b;
    k::scalar::axpy(0.25, a.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == b[i] + 0.25 * a[i]);
  }
}

TEST_CASE("SIMD kernels agree with scalar to rounding") {
  BackendGuard guard;
  for (auto backend : simd_backends()) {
    CAPTURE(k::name(backend));
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 8u, 9u, 31u, 64u, 161u}) {
      auto a = random_vec(n, 7 * n);
      auto b = random_vec(n, 11 * n);
      double simd = 0.0;
      std::vector<double> y_simd = b;
#if defined(__x86_64__)
      if (backend == k::Backend::avx2) {
        simd = k::avx2::dot(a.data(), b.data(), n);
        k::avx2::axpy(-1.5, a.data(), y_simd.data(), n);
      }
#endif
#if defined(__aarch64__)
      if (backend == k::Backend::neon) {
        simd = k::neon::dot(a.data(), b.data(), n);
        k::neon::axpy(-1.5, a.data(), y_simd.data(), n);
      }
#endif
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(simd - k::scalar::dot(a.data(), b.data(), n)) <= 1e-14 * (mag + 1.0));
      std::vector<double> y_ref = b;
      k::scalar::axpy(-1.5, a.data(), y_ref.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y_simd[i] - y_ref[i]) <= 1e-15 * (std::abs(y_ref[i]) + 1.0));
    }
  }
}

TEST_CASE("matrix kernels agree across backends") {
  BackendGuard guard;
  const std::size_t rows = 13, cols = 7;
  auto m = random_vec(rows * cols, 3);
  auto x = random_vec(cols, 4);
  auto v = random_vec(rows, 5);

  REQUIRE(k::select(k::Backend::scalar));
  std::vector<double> out_ref(rows, 0.5), outt_ref(cols, -0.5), ger_ref = m;
  k::gemv_acc(m, rows, cols, x, out_ref);
  k::gemv_t_acc(m, rows, cols, v, outt_ref);
  k::ger_acc(v, x, ger_ref);

  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.5;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * x[c];
    CHECK(out_ref[r] == doctest::Approx(s).epsilon(1e-14));
  }
  for (std::size_t c = 0; c < cols; ++c) {
    double s = -0.5;
    for (std::size_t r = 0; r < rows; ++r) s += m[r * cols + c] * v[r];
    CHECK(outt_ref[c] == doctest::Approx(s).epsilon(1e-14));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) CHECK(ger_ref[r * cols + c] == m[r * cols + c] + v[r] * x[c]);
  }

  for (auto backend : simd_backends()) {
    CAPTURE(k::name(backend));
    REQUIRE(k::select(backend));
    std::vector<double> out(rows, 0.5), outt(cols, -0.5), ger = m;
    k::gemv_acc(m, rows, cols, x, out);
    k::gemv_t_acc(m, rows, cols, v, outt);
    k::ger_acc(v, x, ger);
    for (std::size_t r = 0; r < rows; ++r) CHECK(out[r] == doctest::Approx(out_ref[r]).epsilon(1e-13));
    for (std::size_t c = 0; c < cols; ++c) CHECK(outt[c] == doctest::Approx(outt_ref[c]).epsilon(1e-13));
    for (std::size_t i = 0; i < ger.size(); ++i) CHECK(ger[i] == doctest::Approx(ger_ref[i]).epsilon(1e-13));
  }
}

TEST_CASE("backend selection") {
  BackendGuard guard;
  CHECK(k::supported(k::Backend::scalar));
  CHECK(k::select(k::Backend::scalar));
  CHECK(k::active() == k::Backend::scalar);
  CHECK(k::name(k::Backend::scalar) == "scalar");
#if !defined(__aarch64__)
  CHECK_FALSE(k::select(k::Backend::neon));
  CHECK(k::active() == k::Backend::scalar);
#endif
}
