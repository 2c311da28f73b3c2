#pragma once

#include <cstdint>

namespace pathdens {

// Stateless counter-based generator: every draw is a pure function of
// (seed, stream, counter), so draws can be made in any order on any thread.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t bits(std::uint64_t counter, std::uint32_t lane = 0) const;
  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter, std::uint32_t lane = 0) const;
  // Standard normal (Box-Muller on lanes 0 and 1 of the counter).
  double normal(std::uint64_t counter) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
};

// Derive a child stream id from a parent stream and a tag, e.g. (sample index, purpose).
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag);

}  // namespace pathdens
