#pragma once

// Dense inner-loop kernels used by model fitting and the exact oracle.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant
// is chosen once at runtime from CPU features; tests pin each variant and
// compare it against the scalar reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace seqpi::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

// Best variant this CPU can run.
Isa detect_isa() noexcept;

// Variant currently used by the dispatching entry points below.
Isa active_isa() noexcept;

// Override dispatch (tests, benchmarking). Returns false and leaves the
// active variant unchanged if `isa` is not available on this machine.
bool set_active_isa(Isa isa) noexcept;

bool isa_available(Isa isa) noexcept;

// sum_i x[i] * y[i]
double dot(std::span<const double> x, std::span<const double> y);

// sum_i w[i] * x[i] * y[i]
double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y);

// y[i] += alpha * x[i]
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Per-ISA entry points. Calling a variant the CPU lacks is undefined.
namespace scalar {
double dot(const double* x, const double* y, std::size_t n) noexcept;
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
double dot(const double* x, const double* y, std::size_t n) noexcept;
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2

namespace neon {
double dot(const double* x, const double* y, std::size_t n) noexcept;
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon

}  // namespace seqpi::kernels
