#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace netexp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic sub-stream seed from a root seed, a textual tag and up to
// two indices. Used so that replications, fit blocks, etc. get independent
// streams that do not depend on thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t state = root;
  for (unsigned char c : tag) {
    state ^= static_cast<std::uint64_t>(c);
    (void)splitmix64(state);
  }
  state ^= 0x1F0A2B3C4D5E6F70ULL + a;
  (void)splitmix64(state);
  state ^= 0x8899AABBCCDDEEFFULL + b;
  return splitmix64(state);
}

// xoshiro256++ with an explicit, platform-independent draw interface.
// Normal variates use the plain Box-Muller transform so every call consumes
// exactly two uniforms; the stream layout never depends on call history.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // guard against log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace netexp
