#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace jobclf {

// std::uniform_int_distribution and std::shuffle are implementation defined,
// so seeded results would differ between standard libraries. These helpers
// only rely on the (fully specified) mt19937_64 output sequence.

/// Uniform integer in [0, bound), bound > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

template <typename T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace jobclf
