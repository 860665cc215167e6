#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kmf {

// Seeded RNG with fixed, implementation-independent output streams.
// std::*_distribution is implementation-defined, so uniforms and normals are
// generated explicitly; runs with equal seeds reproduce bit-identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // uniform in [0,1)
  double uniform() {
    return (eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }

  // Box-Muller, one value per call with cached pair
  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    cache_ = r * std::sin(2.0 * M_PI * u2);
    have_cache_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 eng_;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace kmf
