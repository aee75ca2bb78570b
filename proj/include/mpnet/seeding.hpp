#pragma once

#include <cstdint>

namespace mpnet {

/// SplitMix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of child stream `index` under `parent`. Runs, columns and permutation
/// replicates each get their own stream, so results do not depend on the
/// order in which parallel tasks execute.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::uint64_t index) noexcept {
  return mix64(parent ^ mix64(index));
}

/// Domain tags keep streams derived from the same parent disjoint.
enum class Stream : std::uint64_t {
  imputation = 0x494d50,
  permutation = 0x50524d,
  direct = 0x444952,
};

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag,
                                    std::uint64_t index) noexcept {
  return derive_seed(derive_seed(parent, tag), index);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, Stream tag,
                                    std::uint64_t index) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(tag), index);
}

} // namespace mpnet
