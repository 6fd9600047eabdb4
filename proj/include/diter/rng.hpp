#pragma once

// Portable seeded randomness. The standard distributions are implementation
// defined, so everything that feeds a reproducible artifact goes through here.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace diter::rng {

using engine = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits.
inline double unit(engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound), Lemire's multiply-shift with rejection.
inline std::uint64_t below(engine& gen, std::uint64_t bound) {
  if (bound <= 1) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(gen()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t floor = (0 - bound) % bound;
    while (low < floor) {
      m = static_cast<unsigned __int128>(gen()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

// Fisher-Yates.
template <typename T>
void shuffle(std::span<T> items, engine& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(gen, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace diter::rng
