#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace qbc {

// SplitMix64 finalizer.  Used to expand seeds and derive stream states.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// xoshiro256** generator with counter-derived streams.
//
// Rng(seed, stream) is a pure function of (seed, stream): trial i of a Monte
// Carlo run always sees the same draws no matter how trials are scheduled
// across threads.  All distributions are implemented from raw bits so the
// sequence does not depend on the C++ standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = mix64(seed) ^ mix64(0x5851f42d4c957f2dull * (stream + 1));
    for (auto& w : s_) {
      x = mix64(x);
      w = x;
    }
    // xoshiro must not start from the all-zero state.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[3] = 0x9e3779b97f4a7c15ull;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).  Bitmask rejection: exact, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    if (n == 1) return 0;
    const std::uint64_t mask = mask_for(n - 1);
    std::uint64_t v;
    do {
      v = next() & mask;
    } while (v >= n);
    return v;
  }

  bool coin() { return (next() >> 63) != 0; }

  // Standard normal via Box-Muller (no caching, keeps draws stateless).
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t mask_for(std::uint64_t v) {
    std::uint64_t m = v;
    m |= m >> 1;
    m |= m >> 2;
    m |= m >> 4;
    m |= m >> 8;
    m |= m >> 16;
    m |= m >> 32;
    return m;
  }

  std::uint64_t s_[4];
};

}  // namespace qbc
