#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace evosearch {

// Stateless splitmix64 finalizer. Every seed in the project is derived through
// this mixer so that parallel and serial schedules draw identical streams.
inline constexpr uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: fold each word into the running state.
inline constexpr uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> words) {
  uint64_t s = mix64(master);
  for (uint64_t w : words) s = mix64(s ^ w);
  return s;
}

// Deterministic generator with explicit draw algorithms. std::mt19937 would be
// portable too, but the std distributions are not, so draws are spelled out here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return mix64(state_++); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound). Modulo bias is negligible for the bounds used here
  // and keeps the draw a single deterministic step.
  int next_int(int bound) { return static_cast<int>(next_u64() % static_cast<uint64_t>(bound)); }

  size_t next_index(size_t bound) { return static_cast<size_t>(next_u64() % bound); }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (single value per call, no caching, so the
  // draw count is predictable).
  double next_gaussian();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

inline double Rng::next_gaussian() {
  // Guard against log(0).
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = next_double();
  double u2 = next_double();
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace evosearch
