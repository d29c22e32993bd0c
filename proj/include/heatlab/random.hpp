#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace heatlab {

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a master seed and a tuple of
// stream identifiers (field id, block index, path index, ...).
std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  return Rng(stream_seed(master, ids));
}

// Uniform double in (0, 1), never exactly 0 or 1.
double uniform_open(Rng& rng);
// Standard normal via Box-Muller; portable across standard libraries.
double standard_normal(Rng& rng);

}  // namespace heatlab
