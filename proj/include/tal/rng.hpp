#pragma once

// Seeded sampling helpers with a fixed algorithm on top of std::mt19937_64.
// The standard <random> distributions are implementation-defined; these are
// not, so a (spec, seed) pair reproduces the same bytes on any toolchain.

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace tal::rng {

using Engine = std::mt19937_64;

// Uniform integer in [0, bound). bound must be positive.
std::uint64_t uniform_below(Engine& eng, std::uint64_t bound);

// Uniform double in [0, 1) with 53 random bits.
double uniform01(Engine& eng);

// Standard normal via Box-Muller (one draw per call).
double standard_normal(Engine& eng);

// Derives an independent stream seed from (seed, salt) with splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

template <typename T>
void shuffle(std::vector<T>& values, Engine& eng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(eng, i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace tal::rng
