#pragma once

#include <cstdint>
#include <random>

namespace fracuc {

/// Generator behind every simulation and random start; recorded in output metadata.
using Rng = std::mt19937_64;
inline constexpr const char* kRngName = "mt19937_64+normal_distribution";

/// SplitMix64 finaliser; sub-seed k of a master seed is splitmix64(seed + k * golden gamma).
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) noexcept {
    return splitmix64(seed + k * 0x9E3779B97F4A7C15ULL);
}

}  // namespace fracuc
