#include "qspin/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qspin {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t stream_id(std::span<const std::uint64_t> coords) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (auto c : coords) h = mix64(h ^ mix64(c));
  return h;
}

std::uint64_t Stream::u64_at(std::uint64_t index) const noexcept {
  // One Philox block yields two 64-bit words.
  const std::uint64_t block = index >> 1;
  const std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = philox4x32(ctr, key);
  const std::size_t w = (index & 1u) * 2;
  return (static_cast<std::uint64_t>(out[w + 1]) << 32) | out[w];
}

std::uint64_t sample_poisson_count(double mean, Stream& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    double p = std::exp(-mean);
    double cdf = p;
    const double u = rng.uniform();
    std::uint64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      if (p <= 0.0) break;  // underflowed tail; u sits in the last ulp of the cdf
      cdf += p;
    }
    return k;
  }
  // PTRS, W. Hoermann, "The transformed rejection method for generating
  // Poisson random variables", Insurance: Math. Econ. 12 (1993).
  const double smu = std::sqrt(mean);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * log_mean - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace qspin
