#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace clubs {

// splitmix64 finalizer. Used to turn (base seed, stream tag) pairs into
// decorrelated engine seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream ^ 0x5851f42d4c957f2dULL));
}

// mt19937_64 plus hand-rolled draw helpers. The standard pins down the engine
// bit-for-bit but leaves <random> distributions implementation-defined, so
// every distribution used here is spelled out to keep runs reproducible
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform over {0, ..., n - 1}, unbiased via rejection.
  long below(long n) {
    if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
    const auto un = static_cast<std::uint64_t>(n);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % un;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return static_cast<long>(v % un);
  }

  bool bernoulli(double p) { return unit() < p; }

  // Box-Muller without caching: two uniforms per draw, always.
  double gaussian() {
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(static_cast<long>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::mt19937_64 gen_;
};

}  // namespace clubs
