#pragma once

// Counter-based keyed hashing. Every random quantity in the library is a pure
// function of (seed, stream tag, integer coordinates), so values never depend
// on evaluation order or thread count.

#include <cstdint>
#include <initializer_list>
#include <span>

namespace hlpp {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Absorbs one more word into a running hash state.
constexpr std::uint64_t absorb(std::uint64_t state, std::uint64_t word) noexcept {
  return mix64(state ^ (word * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E5B5ULL));
}

// Stream tags keep unrelated uses of the same seed independent.
enum class Stream : std::uint64_t {
  IidWeight = 0x1D1DULL,
  BrwBox = 0xB2B0ULL,
  PoissonLayer = 0x9015ULL,
  Replicate = 0x2E9CULL,
};

constexpr std::uint64_t keyed_hash(std::uint64_t seed, Stream stream,
                                   std::initializer_list<std::int64_t> words) noexcept {
  std::uint64_t h = absorb(mix64(seed), static_cast<std::uint64_t>(stream));
  for (auto w : words) h = absorb(h, static_cast<std::uint64_t>(w));
  return h;
}

inline std::uint64_t keyed_hash(std::uint64_t seed, Stream stream,
                                std::span<const std::int64_t> words) noexcept {
  std::uint64_t h = absorb(mix64(seed), static_cast<std::uint64_t>(stream));
  for (auto w : words) h = absorb(h, static_cast<std::uint64_t>(w));
  return h;
}

// Uniform on [0, 1) with 53 random bits.
constexpr double to_unit_closed_open(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform on (0, 1); never exactly 0, safe for quantile transforms with poles.
constexpr double to_unit_open(std::uint64_t h) noexcept {
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace hlpp
