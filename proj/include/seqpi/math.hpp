#pragma once

#include <algorithm>
#include <cmath>

namespace seqpi {

inline double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

// Measurement resolution of continuous vitals; keeps text round-trips exact.
inline double quantize(double x) noexcept { return std::round(x * 100.0) / 100.0; }

inline double clamp_quantize(double x, double lo, double hi) noexcept {
  return quantize(std::clamp(x, lo, hi));
}

}  // namespace seqpi
