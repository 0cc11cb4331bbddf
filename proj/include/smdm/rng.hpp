#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace smdm {

namespace detail {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

// Counter-based splittable PRNG (SplitMix64 core).  Every module draws from
// its own named stream derived off the root seed, so adding draws in one
// place never shifts another module's sequence, and per-item streams make
// fan-out order irrelevant.
class Rng {
 public:
  explicit Rng(uint64_t key) : key_(key) {}

  Rng stream(std::string_view name) const {
    return Rng(detail::mix64(key_ ^ detail::fnv1a64(name)));
  }
  Rng stream(uint64_t index) const {
    return Rng(detail::mix64(key_ ^ (0xA24BAED4963EE407ull + index)));
  }

  uint64_t next_u64() {
    return detail::mix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // u1 == 0 would take log(0); nudge into (0, 1].
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    int span = hi - lo + 1;
    int k = static_cast<int>(uniform() * span);
    if (k >= span) k = span - 1;
    return lo + k;
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace smdm
