#pragma once

#include <cstdint>

namespace elgm::rng {

// Philox4x32-10 counter-based generator. A (seed, stream, index) triple maps
// to the same double on every platform, which is what makes "same seed, same
// output" a contract rather than a hope. Streams separate independent uses
// (node choices vs. normal deviates vs. covariate draws, ...).

struct Philox4x32 {
  uint32_t v[4];
};

Philox4x32 philox4x32(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                      uint32_t k0, uint32_t k1);

// idx-th uniform double in (0,1) of the given (seed, stream) sequence.
double uniform01(uint64_t seed, uint64_t stream, uint64_t idx);

// Standard normal deviate via the inverse-CDF (Wichura AS241), so the mapping
// from uniforms to normals is also platform-independent.
double normal(uint64_t seed, uint64_t stream, uint64_t idx);

// Inverse standard normal CDF, accurate to ~1e-15 relative.
double inverse_normal_cdf(double p);

// exponential with unit rate
double exponential(uint64_t seed, uint64_t stream, uint64_t idx);

// uniform integer in {0, ..., n-1}
uint64_t uniform_index(uint64_t seed, uint64_t stream, uint64_t idx, uint64_t n);

}  // namespace elgm::rng
