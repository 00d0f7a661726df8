#pragma once

// Seeded random sources with deterministically derived substreams.
//
// A substream is a fresh engine seeded from (base seed, key...) through
// std::seed_seq, so results never depend on how work is scheduled.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace seqpi {

using Rng = std::mt19937_64;

// Mixes a base seed and an ordered list of keys into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

Rng substream(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

inline double uniform01(Rng& rng) {
  return std::generate_canonical<double, 53>(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01(rng) < p;
}

inline double normal(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

inline int poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<int> dist(mean);
  return dist(rng);
}

// Index drawn from an (unnormalised-tolerant) probability vector.
int categorical(Rng& rng, std::span<const double> probs);

}  // namespace seqpi
