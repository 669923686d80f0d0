#include <doctest.h>

#include <cmath>

#include "rng.hpp"
#include "util.hpp"

using namespace elgm;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors published with the original counter-based RNG suite.
  auto z = rng::philox4x32(0, 0, 0, 0, 0, 0);
  CHECK(z.v[0] == 0x6627e8d5u);
  CHECK(z.v[1] == 0xe169c58du);
  CHECK(z.v[2] == 0xbc57ac4cu);
  CHECK(z.v[3] == 0x9b00dbd8u);

  auto pi = rng::philox4x32(0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u,
                            0xa4093822u, 0x299f31d0u);
  CHECK(pi.v[0] == 0xd16cfe09u);
  CHECK(pi.v[1] == 0x94fdccebu);
  CHECK(pi.v[2] == 0x5001e420u);
  CHECK(pi.v[3] == 0x24126ea1u);

  auto ff = rng::philox4x32(0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu,
                            0xffffffffu, 0xffffffffu);
  CHECK(ff.v[0] == 0x408f276du);
  CHECK(ff.v[1] == 0x41c83b0eu);
  CHECK(ff.v[2] == 0xa20bc7c6u);
  CHECK(ff.v[3] == 0x6d5451fdu);
}

TEST_CASE("uniforms are in (0,1), deterministic, and stream-separated") {
  for (int i = 0; i < 1000; ++i) {
    double u = rng::uniform01(42, 7, i);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(u == rng::uniform01(42, 7, i));
  }
  CHECK(rng::uniform01(42, 7, 3) != rng::uniform01(42, 8, 3));
  CHECK(rng::uniform01(42, 7, 3) != rng::uniform01(43, 7, 3));

  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) mean += rng::uniform01(1, 0, i);
  mean /= n;
  CHECK(std::fabs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("inverse normal CDF matches the erfc-based CDF") {
  CHECK(rng::inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rng::inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(rng::inverse_normal_cdf(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.8, 0.9999, 1.0 - 1e-10}) {
    double x = rng::inverse_normal_cdf(p);
    CHECK(std_normal_cdf(x) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("normal draws have standard moments") {
  const int n = 100000;
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng::normal(9, 0, i);
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::fabs(m1) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform_index covers the range") {
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    uint64_t k = rng::uniform_index(3, 2, i, 5);
    REQUIRE(k < 5);
    counts[k]++;
  }
  for (int c : counts) CHECK(c > 800);
}
