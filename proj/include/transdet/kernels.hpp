#pragma once

// Data-parallel inner loops shared by the backbone, the heads and the BD
// penalty. Every routine has a scalar reference implementation plus SIMD
// variants (AVX2+FMA on x86-64, NEON on aarch64) selected once at runtime.
//
// Set TRANSDET_ISA=scalar in the environment to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace transdet::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // y = A x for row-major A (rows x cols)
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

/// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa) noexcept;

/// Kernel table for a specific variant. Throws std::invalid_argument when
/// the variant is unavailable on this build or CPU.
const KernelTable& table(Isa isa);

/// Variant used by the free functions below. Chosen on first use: the best
/// available one, unless TRANSDET_ISA overrides it.
Isa active_isa() noexcept;

/// Overrides the active variant. Intended for tests and benchmarks; call
/// before spawning worker threads.
void set_active_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sum_squares(std::span<const double> x);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(TRANSDET_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(TRANSDET_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace transdet::kernels
