#pragma once

#include <cstdint>

namespace refocus {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept { return splitmix64(a ^ splitmix64(b)); }

/// Seed of draft `index`: consecutive from the base seed, so a run with fewer drafts is a
/// prefix of a run with more.
inline constexpr std::uint64_t draft_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return base_seed + index;
}

/// Seed of refinement variant `variant` in round `round`; a pure function of its arguments.
inline constexpr std::uint64_t refine_seed(std::uint64_t base_seed, int round, std::uint64_t variant) noexcept {
  return mix_seed(mix_seed(base_seed, static_cast<std::uint64_t>(round)), variant);
}

}  // namespace refocus
