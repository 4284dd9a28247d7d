#pragma once

// Dense inner-loop kernels used by the LSTM: a scalar reference
// implementation plus SIMD variants chosen once at runtime.
//
// Backend selection order: DISTPRE_KERNELS environment variable
// ("scalar", "avx2", "neon") if set and supported, otherwise the widest
// backend the CPU supports. All variants compute the same quantities; SIMD
// variants reassociate sums, so results agree with scalar to rounding, not
// bit-for-bit. Within one process the choice is fixed, which is what the
// determinism guarantees rely on.

#include <cstddef>
#include <span>
#include <string_view>

namespace distpre::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view name(Backend b) noexcept;

bool supported(Backend b) noexcept;

// Backend currently in use.
Backend active() noexcept;

// Override the active backend. Returns false (and changes nothing) when the
// backend is not supported on this host. Not thread-safe with respect to
// concurrent kernel calls; intended for tests and process start-up.
bool select(Backend b) noexcept;

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b) noexcept;

// y[i] += alpha * x[i]
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

// out[r] += sum_c m[r * cols + c] * x[c]
void gemv_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
              std::span<const double> x, std::span<double> out) noexcept;

// out[c] += sum_r m[r * cols + c] * v[r]
void gemv_t_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out) noexcept;

// m[r * cols + c] += u[r] * v[c]
void ger_acc(std::span<const double> u, std::span<const double> v,
             std::span<double> m) noexcept;

// Per-backend entry points, exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon
#endif

}  // namespace distpre::kernels
