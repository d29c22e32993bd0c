#include "heatlab/random.hpp"

#include <cmath>
#include <numbers>

namespace heatlab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t id : ids) s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return s;
}

double uniform_open(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace heatlab
