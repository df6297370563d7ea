#include "dider/rng.hpp"

#include <cmath>
#include <numbers>

namespace dider {
inline namespace DIDER_ABI {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(mix64(seed_) ^ (c * 0xD1B54A32D192ED03ULL));
}

double Rng::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gumbel() { return -std::log(-std::log(uniform())); }

Rng Rng::fork(std::uint64_t key) const {
  return Rng(mix64(seed_ ^ mix64(key + 0x632BE59BD9B4E019ULL)), 0);
}

}  // namespace DIDER_ABI
}  // namespace dider
