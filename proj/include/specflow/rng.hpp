#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace specflow {

/// Deterministic random source. Wraps mt19937_64 but generates uniforms and
/// gaussians from raw 64-bit draws so streams do not depend on the standard
/// library's distribution implementations. Identical seeds give identical
/// streams, which the replayable-report contract relies on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(bits() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller on explicit uniform draws.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Independent deterministic stream for a named subtask. Depends only on
  /// the parent seed and the tag, not on how much of the parent was consumed.
  Rng fork(const std::string& tag) const { return Rng(derive(seed_, tag)); }

  static std::uint64_t derive(std::uint64_t seed, const std::string& tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ull);  // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace specflow
