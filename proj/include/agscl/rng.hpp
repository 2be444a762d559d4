#pragma once

#include "agscl/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace agscl {

/// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t stable_hash(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent generator for one named purpose ("init", "batch", "rand_init", ...).
/// Toggling one consumer never shifts the draws another consumer sees.
inline Rng substream(std::uint64_t seed, std::string_view label) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stable_hash(label)),
                    static_cast<std::uint32_t>(stable_hash(label) >> 32)};
  return Rng(seq);
}

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

}  // namespace agscl
