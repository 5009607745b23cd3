#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pinet {

/// Deterministic random source. std::mt19937_64 has a fully specified output
/// sequence, but the standard distributions do not, so the draws below are
/// hand-rolled. Identifier recorded in checkpoints: "mt19937_64/boxmuller/v1".
class Rng {
 public:
  static constexpr const char* kAlgorithmId = "mt19937_64/boxmuller/v1";

  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(gen_() % span);
  }

  /// Standard normal via Box-Muller; the pair's second value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = radius * std::sin(two_pi * u2);
    have_spare_ = true;
    return radius * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (long i = static_cast<long>(items.size()) - 1; i > 0; --i) {
      std::swap(items[static_cast<std::size_t>(i)],
                items[static_cast<std::size_t>(uniform_int(0, i))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Stable seed mixing for derived streams (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace pinet
