#ifndef CGFORGE_RNG_HPP
#define CGFORGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cgforge::rng {

/// Deterministic standard-normal generator: mt19937_64 bits turned into
/// uniforms explicitly, Box-Muller on top. Identical streams on every
/// platform for a given seed.
class NormalGen {
 public:
  explicit NormalGen(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // in [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t bits() { return eng_(); }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  template <typename T = double>
  std::vector<T> normal_vec(std::size_t n) {
    std::vector<T> v(n);
    for (auto& e : v) e = static_cast<T>(normal());
    return v;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cgforge::rng

#endif
