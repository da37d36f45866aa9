#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mgembed {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

// FNV-1a over bytes. Stable across platforms; used for stream names and
// input digests.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Seed for the named sub-stream `name` (optionally indexed) of a root seed.
// Subsystems draw from their own streams so adding draws in one place never
// perturbs another.
std::uint64_t stream_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0) noexcept;

inline Rng make_stream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(root, name, index));
}

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

// Uniform double in [0, 1) with 53 random bits; independent of the
// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace mgembed
