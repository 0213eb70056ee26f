#pragma once

// Deterministic per-stream random numbers.
//
// A stream is identified by (seed, index). Its state is derived with the
// SplitMix64 finaliser (Steele, Lea, Flood 2014) applied to the pair, and
// draws come from std::mt19937_64 seeded with that value. Doubles are built
// from the top 53 bits, so the sequence is identical on every platform.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace kicktop {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of words.
inline constexpr std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (std::uint64_t w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t index) : engine_(hash_words({seed, index})) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller on two uniforms.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * 3.14159265358979323846 * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kicktop
