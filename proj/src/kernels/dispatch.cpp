#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "transdet/kernels.hpp"

namespace transdet::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(TRANSDET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa pick_default() noexcept {
  if (const char* env = std::getenv("TRANSDET_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_available(Isa::avx2)) return Isa::avx2;
    if (want == "neon" && isa_available(Isa::neon)) return Isa::neon;
  }
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Isa> g_active_isa{Isa::scalar};

const KernelTable& active() noexcept {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Isa isa = pick_default();
    t = &table(isa);
    g_active_isa.store(isa, std::memory_order_relaxed);
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return cpu_has_avx2();
    case Isa::neon:
#if defined(TRANSDET_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel variant '" + std::string(isa_name(isa)) +
                                "' is not available on this build/CPU");
  }
  switch (isa) {
#if defined(TRANSDET_HAVE_AVX2)
    case Isa::avx2: return detail::kAvx2Table;
#endif
#if defined(TRANSDET_HAVE_NEON)
    case Isa::neon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

Isa active_isa() noexcept {
  active();
  return g_active_isa.load(std::memory_order_relaxed);
}

void set_active_isa(Isa isa) {
  const KernelTable* t = &table(isa);
  g_active_isa.store(isa, std::memory_order_relaxed);
  g_active.store(t, std::memory_order_release);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) { return active().sum_squares(x.data(), x.size()); }

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

}  // namespace transdet::kernels
