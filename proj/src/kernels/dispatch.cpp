#include <atomic>
#include <cstdlib>
#include <string>

#include "distpre/kernels.hpp"

namespace distpre::kernels {
namespace {

struct Table {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t) noexcept;
  void (*axpy)(double, const double*, double*, std::size_t) noexcept;
};

constexpr Table kScalar{Backend::scalar, &scalar::dot, &scalar::axpy};
#if defined(DISTPRE_HAVE_AVX2)
constexpr Table kAvx2{Backend::avx2, &avx2::dot, &avx2::axpy};
#endif
#if defined(DISTPRE_HAVE_NEON)
constexpr Table kNeon{Backend::neon, &neon::dot, &neon::axpy};
#endif

const Table* table_for(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return &kScalar;
    case Backend::avx2:
#if defined(DISTPRE_HAVE_AVX2)
      return &kAvx2;
#else
      return nullptr;
#endif
    case Backend::neon:
#if defined(DISTPRE_HAVE_NEON)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Table* initial_table() noexcept {
  if (const char* env = std::getenv("DISTPRE_KERNELS")) {
    std::string v(env);
    Backend want = Backend::scalar;
    bool known = true;
    if (v == "scalar") want = Backend::scalar;
    else if (v == "avx2") want = Backend::avx2;
    else if (v == "neon") want = Backend::neon;
    else known = false;
    if (known && supported(want)) return table_for(want);
  }
  if (supported(Backend::avx2)) return table_for(Backend::avx2);
  if (supported(Backend::neon)) return table_for(Backend::neon);
  return &kScalar;
}

std::atomic<const Table*>& current() noexcept {
  static std::atomic<const Table*> t{initial_table()};
  return t;
}

}  // namespace

std::string_view name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool supported(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2:
#if defined(DISTPRE_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(DISTPRE_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active() noexcept { return current().load(std::memory_order_relaxed)->backend; }

bool select(Backend b) noexcept {
  if (!supported(b)) return false;
  current().store(table_for(b), std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return current().load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  current().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

void gemv_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
              std::span<const double> x, std::span<double> out) noexcept {
  const Table* t = current().load(std::memory_order_relaxed);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] += t->dot(m.data() + r * cols, x.data(), cols);
  }
}

void gemv_t_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out) noexcept {
  const Table* t = current().load(std::memory_order_relaxed);
  for (std::size_t r = 0; r < rows; ++r) {
    t->axpy(v[r], m.data() + r * cols, out.data(), cols);
  }
}

void ger_acc(std::span<const double> u, std::span<const double> v,
             std::span<double> m) noexcept {
  const Table* t = current().load(std::memory_order_relaxed);
  const std::size_t cols = v.size();
  for (std::size_t r = 0; r < u.size(); ++r) {
    t->axpy(u[r], v.data(), m.data() + r * cols, cols);
  }
}

}  // namespace distpre::kernels
