#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "clubs/rng.hpp"

using clubs::Rng;
using clubs::derive_seed;
using clubs::mix_seed;

TEST_CASE("derive_seed separates streams", "[rng]") {
  const std::uint64_t base = 42;
  const std::uint64_t a = derive_seed(base, 1);
  const std::uint64_t b = derive_seed(base, 2);
  const std::uint64_t c = derive_seed(base + 1, 1);
  REQUIRE(a != b);
  REQUIRE(a != c);
  REQUIRE(derive_seed(base, 1) == a);

  // No collisions across a batch of (base, tag) pairs.
  std::vector<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 64; ++s)
    for (std::uint64_t tag = 0; tag < 64; ++tag)
      seen.push_back(derive_seed(s, tag));
  std::sort(seen.begin(), seen.end());
  REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("identical seeds replay identical sequences", "[rng]") {
  Rng a(123456), b(123456), c(123457);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t va = a.next_u64();
    REQUIRE(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  REQUIRE(any_diff);
}

TEST_CASE("unit stays in [0,1) with mean near 1/2", "[rng]") {
  Rng rng(7);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // sd of the mean is 1/sqrt(12 n) ~ 0.00091; allow 5 sigma.
  REQUIRE(std::abs(sum / n - 0.5) < 0.0046);
}

TEST_CASE("range covers the interval", "[rng]") {
  Rng rng(11);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 20000; ++i) {
    const double v = rng.range(-2.0, 3.0);
    REQUIRE(v >= -2.0);
    REQUIRE(v < 3.0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE(lo < -1.9);
  REQUIRE(hi > 2.9);
}

TEST_CASE("below is unbiased across residues", "[rng]") {
  Rng rng(17);
  const long n = 7;
  const int draws = 70000;
  std::array<long, 7> counts{};
  for (int i = 0; i < draws; ++i) {
    const long v = rng.below(n);
    REQUIRE(v >= 0);
    REQUIRE(v < n);
    ++counts[static_cast<std::size_t>(v)];
  }
  const double expected = static_cast<double>(draws) / static_cast<double>(n);
  double chi2 = 0.0;
  for (long c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // 6 degrees of freedom; 32.9 is far beyond the 99.999th percentile.
  REQUIRE(chi2 < 32.9);
  REQUIRE_THROWS_AS(rng.below(0), std::invalid_argument);
  REQUIRE_THROWS_AS(rng.below(-3), std::invalid_argument);
}

TEST_CASE("bernoulli frequency tracks p", "[rng]") {
  Rng rng(23);
  const int n = 100000;
  const double p = 0.3;
  long hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(p) ? 1 : 0;
  const double sd = std::sqrt(p * (1 - p) / n);
  REQUIRE(std::abs(static_cast<double>(hits) / n - p) < 5 * sd);
}

TEST_CASE("gaussian has unit moments", "[rng]") {
  Rng rng(29);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s1 += g;
    s2 += g * g;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle permutes uniformly and keeps the multiset", "[rng]") {
  Rng rng(31);
  std::vector<int> v{1, 2, 2, 3, 5, 8};
  std::vector<int> orig(v);
  rng.shuffle(v);
  std::vector<int> sorted_v(v), sorted_o(orig);
  std::sort(sorted_v.begin(), sorted_v.end());
  std::sort(sorted_o.begin(), sorted_o.end());
  REQUIRE(sorted_v == sorted_o);

  // All 6 orders of a 3-element shuffle appear at roughly equal rates.
  std::map<std::array<int, 3>, long> counts;
  const int trials = 60000;
  for (int i = 0; i < trials; ++i) {
    std::vector<int> t{0, 1, 2};
    rng.shuffle(t);
    ++counts[{t[0], t[1], t[2]}];
  }
  REQUIRE(counts.size() == 6);
  const double expected = trials / 6.0;
  double chi2 = 0.0;
  for (const auto& [perm, c] : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  REQUIRE(chi2 < 30.9);  // 5 dof, far tail
}
