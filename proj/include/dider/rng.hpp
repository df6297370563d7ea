#pragma once

#include "dider/abi.hpp"

#include <cstdint>

namespace dider {
inline namespace DIDER_ABI {

/// Counter-based generator: every draw is a pure function of (seed, counter),
/// so streams can be forked by key and replayed from a saved counter.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Standard Gumbel(0, 1).
  double gumbel();

  /// Independent child stream. Does not advance this stream.
  Rng fork(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace DIDER_ABI
}  // namespace dider
