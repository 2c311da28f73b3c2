#include "pathdens/rng.hpp"

#include <cmath>
#include <numbers>

namespace pathdens {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL))) {}

std::uint64_t CounterRng::bits(std::uint64_t counter, std::uint32_t lane) const {
  std::uint64_t z = mix(key_ ^ mix(counter * 0x9e3779b97f4a7c15ULL + lane));
  return mix(z + key_);
}

double CounterRng::uniform(std::uint64_t counter, std::uint32_t lane) const {
  return (static_cast<double>(bits(counter, lane) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
  const double u1 = uniform(counter, 0);
  const double u2 = uniform(counter, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag) {
  return mix(parent * 0xff51afd7ed558ccdULL ^ mix(tag + 0xc4ceb9fe1a85ec53ULL));
}

}  // namespace pathdens
