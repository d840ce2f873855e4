#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lift {

// Seeded generator with explicit float conversions so that streams are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>((static_cast<__uint128_t>(eng_()) * static_cast<uint64_t>(n)) >> 64);
  }

  // Standard normal via Box-Muller; one value cached per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // N(0, std^2) redrawn until the value lies in [-2, 2].
  double trunc_normal(double std_dev) {
    double v = normal() * std_dev;
    while (v < -2.0 || v > 2.0) v = normal() * std_dev;
    return v;
  }

  // In-place Fisher-Yates shuffle of an index vector.
  template <typename Vec>
  void shuffle(Vec& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace lift
