#pragma once

#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace msdpf {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based seed split: the derived seed depends only on the root and
// the key path, never on the order in which streams are requested.
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(root);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(root, keys));
}

// Uniform double in [0, 1) using the top 53 bits; independent of the
// standard library's generate_canonical implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal draw. Boost's ziggurat sampler is several times faster than
// the polar method behind std::normal_distribution and gives the same stream
// on every standard library.
inline double std_normal(Rng& rng) {
  boost::random::normal_distribution<double> z;
  return z(rng);
}

}  // namespace msdpf
