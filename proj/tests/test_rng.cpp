#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "qspin/rng.hpp"
#include "qspin/stats.hpp"

using namespace qspin;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("random access matches sequential draws") {
  Stream a(42, {1, 2, 3});
  const Stream b(42, {1, 2, 3});
  for (std::uint64_t i = 0; i < 100; ++i) CHECK(a.next_u64() == b.u64_at(i));
  CHECK(a.position() == 100);
}

TEST_CASE("streams are separated by seed and coordinates") {
  CHECK(Stream(1, {1, 0}).u64_at(0) != Stream(2, {1, 0}).u64_at(0));
  CHECK(Stream(1, {1, 0}).u64_at(0) != Stream(1, {1, 1}).u64_at(0));
  CHECK(Stream(1, {1, 0}).u64_at(0) != Stream(1, {0, 1}).u64_at(0));
  CHECK(stream_id({1, 2}) == stream_id({1, 2}));
  CHECK(derive_seed(5, {1, 2}) == derive_seed(5, {1, 2}));
  CHECK(derive_seed(5, {1, 2}) != derive_seed(6, {1, 2}));
}

TEST_CASE("uniforms lie on the 2^-53 grid in [0, 1)") {
  Stream s(7, {9});
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    CHECK(1.0 - (1.0 - u) == u);
    CHECK(std::ldexp(u, 53) == std::floor(std::ldexp(u, 53)));
  }
  CHECK(to_unit(~0ULL) < 1.0);
  CHECK(to_unit(0) == 0.0);
}

TEST_CASE("uniform moments") {
  Stream s(11, {4});
  std::vector<double> xs(200000);
  for (auto& x : xs) x = s.uniform();
  CHECK(std::fabs(stats::mean(xs) - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / xs.size()));
  CHECK(std::fabs(stats::variance(xs) - 1.0 / 12.0) < 2e-3);
}

TEST_CASE("poisson counts have matching mean and variance") {
  for (double mean : {0.0, 0.3, 4.0, 9.9, 10.0, 57.5, 3000.0}) {
    Stream s(3, {static_cast<std::uint64_t>(mean * 10)});
    const int n = 40000;
    std::vector<double> xs(n);
    for (auto& x : xs) x = static_cast<double>(sample_poisson_count(mean, s));
    const double m = stats::mean(xs);
    CAPTURE(mean);
    if (mean == 0.0) {
      CHECK(m == 0.0);
      continue;
    }
    CHECK(std::fabs(m - mean) < 4.5 * std::sqrt(mean / n));
    // Var of the sample variance for Poisson: (mu + 2 mu^2 n/(n-1)) / n.
    const double var_se = std::sqrt((mean + 2.0 * mean * mean) / n);
    CHECK(std::fabs(stats::variance(xs) - mean) < 5.0 * var_se);
  }
}

TEST_CASE("poisson count pmf at small mean") {
  const double mean = 2.5;
  Stream s(17, {1});
  const int n = 100000;
  std::vector<int> hist(20, 0);
  for (int i = 0; i < n; ++i) ++hist[std::min<std::uint64_t>(sample_poisson_count(mean, s), 19)];
  double p = std::exp(-mean);
  for (int k = 0; k < 8; ++k) {
    const double expected = n * p;
    CHECK(std::fabs(hist[k] - expected) < 5.0 * std::sqrt(expected));
    p *= mean / (k + 1);
  }
}

TEST_CASE("poisson count rejects bad means") {
  Stream s(1, {1});
  CHECK_THROWS(sample_poisson_count(-1.0, s));
  CHECK_THROWS(sample_poisson_count(NAN, s));
}
