#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace qspin {

/// Purpose tags separate the random streams used by different stages of a
/// run, so adding draws to one stage never shifts another.
enum class Purpose : std::uint64_t {
  points = 1,
  thinning = 2,
  chain = 3,
  bootstrap = 4,
  initial_state = 5,
  instance = 6,
  component_flip = 7,
};

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; used to fold stream coordinates into one id.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Hash an ordered list of coordinates (purpose, replicate, cell, ...) into a
/// 64-bit stream id.
std::uint64_t stream_id(std::span<const std::uint64_t> coords) noexcept;
inline std::uint64_t stream_id(std::initializer_list<std::uint64_t> coords) noexcept {
  return stream_id(std::span<const std::uint64_t>(coords.begin(), coords.size()));
}

/// Child seed for a sub-experiment (grid cell, system size, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::span<const std::uint64_t> coords) noexcept {
  return mix64(master ^ stream_id(coords));
}
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) noexcept {
  return derive_seed(master, std::span<const std::uint64_t>(coords.begin(), coords.size()));
}

/// Converts 64 random bits to a double in [0, 1) on the 2^-53 grid. Values on
/// that grid satisfy 1 - u exactly, which the mirrored-stream tests rely on.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based random stream. The state is (seed, stream id, position);
/// any position can be evaluated directly, so results never depend on the
/// order in which streams are consumed.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t id) noexcept : seed_(seed), id_(id) {}
  Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept
      : seed_(seed), id_(stream_id(coords)) {}

  std::uint64_t next_u64() noexcept { return u64_at(position_++); }
  double uniform() noexcept { return to_unit(next_u64()); }

  /// The index-th 64-bit word of this stream (does not advance the stream).
  std::uint64_t u64_at(std::uint64_t index) const noexcept;
  double uniform_at(std::uint64_t index) const noexcept { return to_unit(u64_at(index)); }

  std::uint64_t position() const noexcept { return position_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t id() const noexcept { return id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t id_;
  std::uint64_t position_ = 0;
};

/// Exact Poisson(mean) variate: inversion for small means, Hoermann's PTRS
/// transformed rejection otherwise.
std::uint64_t sample_poisson_count(double mean, Stream& rng);

}  // namespace qspin
