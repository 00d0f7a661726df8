#include "seqpi/kernels.hpp"

#include <atomic>
#include <cassert>

namespace seqpi::kernels {
namespace {

#if defined(SEQPI_HAVE_AVX2)
bool cpu_has_avx2() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

std::atomic<Isa>& active() noexcept {
  static std::atomic<Isa> isa{detect_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    case Isa::scalar: break;
  }
  return "scalar";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(SEQPI_HAVE_AVX2)
      return cpu_has_avx2();
#else
      return false;
#endif
    case Isa::neon:
#if defined(SEQPI_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() noexcept {
  if (isa_available(Isa::avx2)) return Isa::avx2;
  if (isa_available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

bool set_active_isa(Isa isa) noexcept {
  if (!isa_available(isa)) return false;
  active().store(isa, std::memory_order_relaxed);
  return true;
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  switch (active_isa()) {
#if defined(SEQPI_HAVE_AVX2)
    case Isa::avx2: return avx2::dot(x.data(), y.data(), x.size());
#endif
#if defined(SEQPI_HAVE_NEON)
    case Isa::neon: return neon::dot(x.data(), y.data(), x.size());
#endif
    default: return scalar::dot(x.data(), y.data(), x.size());
  }
}

double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> y) {
  assert(w.size() == x.size() && x.size() == y.size());
  switch (active_isa()) {
#if defined(SEQPI_HAVE_AVX2)
    case Isa::avx2: return avx2::weighted_dot(w.data(), x.data(), y.data(), x.size());
#endif
#if defined(SEQPI_HAVE_NEON)
    case Isa::neon: return neon::weighted_dot(w.data(), x.data(), y.data(), x.size());
#endif
    default: return scalar::weighted_dot(w.data(), x.data(), y.data(), x.size());
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  switch (active_isa()) {
#if defined(SEQPI_HAVE_AVX2)
    case Isa::avx2: avx2::axpy(alpha, x.data(), y.data(), x.size()); return;
#endif
#if defined(SEQPI_HAVE_NEON)
    case Isa::neon: neon::axpy(alpha, x.data(), y.data(), x.size()); return;
#endif
    default: scalar::axpy(alpha, x.data(), y.data(), x.size()); return;
  }
}

}  // namespace seqpi::kernels
