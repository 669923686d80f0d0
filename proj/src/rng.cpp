#include "rng.hpp"

#include <cmath>

namespace elgm::rng {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  uint64_t p = static_cast<uint64_t>(a) * static_cast<uint64_t>(b);
  hi = static_cast<uint32_t>(p >> 32);
  lo = static_cast<uint32_t>(p);
}

}  // namespace

Philox4x32 philox4x32(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                      uint32_t k0, uint32_t k1) {
  uint32_t r0 = c0, r1 = c1, r2 = c2, r3 = c3;
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, r0, hi0, lo0);
    mulhilo(kPhiloxM1, r2, hi1, lo1);
    uint32_t n0 = hi1 ^ r1 ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ r3 ^ k1;
    uint32_t n3 = lo0;
    r0 = n0;
    r1 = n1;
    r2 = n2;
    r3 = n3;
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return Philox4x32{{r0, r1, r2, r3}};
}

double uniform01(uint64_t seed, uint64_t stream, uint64_t idx) {
  // One block yields two doubles; block index = idx/2, lane = idx%2.
  uint64_t block = idx >> 1;
  Philox4x32 out = philox4x32(
      static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32),
      static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32),
      static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32));
  uint32_t a, b;
  if ((idx & 1u) == 0) {
    a = out.v[0];
    b = out.v[1];
  } else {
    a = out.v[2];
    b = out.v[3];
  }
  // 53 random bits -> (0,1); +0.5 offset keeps the value strictly inside.
  uint64_t bits = (static_cast<uint64_t>(a >> 6) << 27) | (b >> 5);
  return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
}

double inverse_normal_cdf(double p) {
  // Wichura (1988), algorithm AS 241, PPND16.
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

double normal(uint64_t seed, uint64_t stream, uint64_t idx) {
  return inverse_normal_cdf(uniform01(seed, stream, idx));
}

double exponential(uint64_t seed, uint64_t stream, uint64_t idx) {
  return -std::log(uniform01(seed, stream, idx));
}

uint64_t uniform_index(uint64_t seed, uint64_t stream, uint64_t idx, uint64_t n) {
  double u = uniform01(seed, stream, idx);
  uint64_t k = static_cast<uint64_t>(u * static_cast<double>(n));
  return (k >= n) ? n - 1 : k;
}

}  // namespace elgm::rng
