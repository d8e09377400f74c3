#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"

using clubs::BanditState;
using clubs::ClusterAggregate;
using clubs::ContextSet;
using clubs::Mat;
using clubs::Rng;
using clubs::Vec;

namespace {

Vec unit_axis(int dim, int k) {
  Vec v = Vec::Zero(dim);
  v[k] = 1.0;
  return v;
}

Vec random_unit(int dim, Rng& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.gaussian();
  return v / v.norm();
}

}  // namespace

TEST_CASE("axis update produces the closed-form state", "[bandit]") {
  BanditState s(2);
  s.observe(unit_axis(2, 0), 0.5);
  Mat fwd(2, 2), inv(2, 2);
  fwd << 2, 0, 0, 1;
  inv << 0.5, 0, 0, 1;
  REQUIRE((s.fwd() - fwd).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE((s.inv() - inv).cwiseAbs().maxCoeff() < 1e-15);
  REQUIRE(s.bias()[0] == Catch::Approx(0.5));
  REQUIRE(s.bias()[1] == 0.0);
  REQUIRE(s.weight()[0] == Catch::Approx(0.25));
  REQUIRE(s.serves() == 1);
}

TEST_CASE("zero context only advances the serve counter", "[bandit]") {
  BanditState s(3);
  s.observe(Vec::Zero(3), 0.7);
  REQUIRE(s.serves() == 1);
  REQUIRE((s.fwd() - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((s.inv() - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s.bias().cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s.weight().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("maintained inverse tracks direct inversion", "[bandit]") {
  const int d = 10;
  BanditState s(d);
  Rng rng(101);
  Mat fwd = Mat::Identity(d, d);
  for (int i = 0; i < 500; ++i) {
    const Vec x = random_unit(d, rng);
    fwd += x * x.transpose();
    s.observe(x, rng.range(-1.0, 1.0));
    if (i % 50 == 0) {
      const Mat direct = fwd.inverse();
      REQUIRE((s.inv() - direct).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  REQUIRE((s.inv() - fwd.inverse()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("inverse times forward stays near identity across dims", "[bandit]") {
  for (int d : {2, 10, 25}) {
    BanditState s(d);
    Rng rng(200 + d);
    for (int i = 0; i < 2000; ++i) s.observe(random_unit(d, rng), rng.unit());
    const Mat prod = s.inv() * s.fwd();
    REQUIRE((prod - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("observe validates input", "[bandit]") {
  BanditState s(3);
  REQUIRE_THROWS_AS(s.observe(Vec::Zero(2), 0.0), std::invalid_argument);
  Vec bad = Vec::Zero(3);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(s.observe(bad, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(
      s.observe(Vec::Ones(3), std::numeric_limits<double>::infinity()),
      std::invalid_argument);
  REQUIRE(s.serves() == 0);
  REQUIRE_THROWS_AS(BanditState(0), std::invalid_argument);
}

TEST_CASE("confidence width endpoints and scaling", "[bandit]") {
  const Mat inv = Mat::Identity(4, 4);
  const Vec x = unit_axis(4, 2);
  REQUIRE(clubs::confidence_width(x, inv, 0, 1.3) == 0.0);
  // log(t + 1) = 1 at t = e - 1, so the width of a unit vector equals alpha.
  const long t = static_cast<long>(std::llround(std::exp(1.0))) - 1;
  const double w = clubs::confidence_width(x, inv, t, 0.8);
  REQUIRE(w ==
          Catch::Approx(0.8 * std::sqrt(std::log(static_cast<double>(t) + 1.0)))
              .epsilon(1e-12));
  // Linear in alpha.
  const double w1 = clubs::confidence_width(x, inv, 10, 1.0);
  const double w3 = clubs::confidence_width(x, inv, 10, 3.0);
  REQUIRE(w3 == Catch::Approx(3.0 * w1).epsilon(1e-12));
  REQUIRE_THROWS_AS(clubs::confidence_width(x, inv, -1, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(clubs::confidence_width(x, inv, 1, 0.0), std::invalid_argument);
}

TEST_CASE("deletion threshold closed forms", "[bandit]") {
  const double a2 = 0.7;
  REQUIRE(clubs::deletion_threshold(0, a2) == Catch::Approx(a2).epsilon(1e-12));
  // At real-valued T = e - 1 the expression is alpha2 * sqrt(2 / e); the
  // integer counts on either side must bracket it.
  const double at_e = a2 * std::sqrt(2.0 / std::exp(1.0));
  REQUIRE(clubs::deletion_threshold(2, a2) < at_e);
  REQUIRE(at_e < clubs::deletion_threshold(1, a2));
  const double expect = a2 * std::sqrt((1.0 + std::log(3.0)) / 3.0);
  REQUIRE(clubs::deletion_threshold(2, a2) == Catch::Approx(expect).epsilon(1e-12));
  REQUIRE(clubs::deletion_threshold(100000000L, a2) < 1e-3 * a2);
  // Strictly decreasing on a sample of points.
  double prev = clubs::deletion_threshold(0, a2);
  for (long T : {1L, 2L, 5L, 10L, 100L, 10000L}) {
    const double cur = clubs::deletion_threshold(T, a2);
    REQUIRE(cur < prev);
    prev = cur;
  }
  REQUIRE_THROWS_AS(clubs::deletion_threshold(-1, a2), std::invalid_argument);
  REQUIRE_THROWS_AS(clubs::deletion_threshold(3, 0.0), std::invalid_argument);
}

TEST_CASE("selection is invariant to candidate order", "[bandit]") {
  const int d = 6;
  Rng rng(404);
  BanditState s(d);
  for (int i = 0; i < 40; ++i) s.observe(random_unit(d, rng), rng.unit());
  ContextSet ctx;
  ctx.round = 17;
  for (int k = 0; k < 10; ++k) ctx.vectors.push_back(random_unit(d, rng));
  const int pick = clubs::select_item(s.weight(), s.inv(), ctx, ctx.round, 0.4);
  const Vec chosen = ctx.vectors[static_cast<std::size_t>(pick)];
  for (int trial = 0; trial < 20; ++trial) {
    ContextSet shuffled = ctx;
    rng.shuffle(shuffled.vectors);
    const int p2 =
        clubs::select_item(s.weight(), s.inv(), shuffled, shuffled.round, 0.4);
    REQUIRE((shuffled.vectors[static_cast<std::size_t>(p2)] - chosen)
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
}

TEST_CASE("selection breaks exact ties toward the lowest index", "[bandit]") {
  const int d = 3;
  BanditState s(d);
  ContextSet ctx;
  ctx.round = 5;
  const Vec x = unit_axis(d, 1);
  ctx.vectors = {x, x, x};
  REQUIRE(clubs::select_item(s.weight(), s.inv(), ctx, ctx.round, 1.0) == 0);
  ContextSet empty;
  REQUIRE_THROWS_AS(clubs::select_item(s.weight(), s.inv(), empty, 1, 1.0),
                    std::invalid_argument);
}

TEST_CASE("free wrappers mirror the member calls", "[bandit]") {
  const int d = 4;
  Rng rng(505);
  std::vector<BanditState> states(3, BanditState(d));
  for (int i = 0; i < 30; ++i)
    clubs::rank_one_update(states[static_cast<std::size_t>(i % 3)],
                           random_unit(d, rng), rng.unit());
  const ClusterAggregate agg = clubs::build_aggregate(states, {0, 1, 2});
  ContextSet ctx;
  ctx.round = 9;
  for (int k = 0; k < 5; ++k) ctx.vectors.push_back(random_unit(d, rng));
  REQUIRE(clubs::select_item(agg, ctx, 0.3) ==
          clubs::select_item(agg.weight(), agg.inv(), ctx, ctx.round, 0.3));
  REQUIRE(clubs::confidence_width(ctx.vectors[0], agg, 9, 0.3) ==
          clubs::confidence_width(ctx.vectors[0], agg.inv(), 9, 0.3));
}

TEST_CASE("singleton aggregate copies the member state verbatim", "[bandit]") {
  const int d = 5;
  Rng rng(606);
  std::vector<BanditState> states(2, BanditState(d));
  for (int i = 0; i < 200; ++i) states[0].observe(random_unit(d, rng), rng.unit());
  const ClusterAggregate agg = ClusterAggregate::from_states(states, {0});
  REQUIRE((agg.fwd() - states[0].fwd()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((agg.inv() - states[0].inv()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((agg.bias() - states[0].bias()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((agg.weight() - states[0].weight()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate sums member corrections once", "[bandit]") {
  const int d = 4;
  Rng rng(707);
  std::vector<BanditState> states(4, BanditState(d));
  Mat fwd_sum = Mat::Identity(d, d);
  Vec bias_sum = Vec::Zero(d);
  for (int i = 0; i < 120; ++i) {
    const int u = static_cast<int>(rng.below(4));
    const Vec x = random_unit(d, rng);
    const double r = rng.range(-1.0, 1.0);
    states[static_cast<std::size_t>(u)].observe(x, r);
    if (u != 3) {  // member 3 stays outside the aggregate
      fwd_sum += x * x.transpose();
      bias_sum += x * r;
    }
  }
  const ClusterAggregate agg = ClusterAggregate::from_states(states, {0, 1, 2});
  REQUIRE((agg.fwd() - fwd_sum).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((agg.bias() - bias_sum).cwiseAbs().maxCoeff() < 1e-12);
  const Mat prod = agg.inv() * agg.fwd();
  REQUIRE((prod - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((agg.weight() - agg.inv() * agg.bias()).cwiseAbs().maxCoeff() < 1e-12);

  REQUIRE_THROWS_AS(ClusterAggregate::from_states(states, {}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ClusterAggregate::from_states(states, {0, 9}),
                    std::invalid_argument);
}

TEST_CASE("incremental aggregate updates match a rebuild", "[bandit]") {
  const int d = 5;
  Rng rng(808);
  std::vector<BanditState> states(3, BanditState(d));
  ClusterAggregate agg = ClusterAggregate::from_states(states, {0, 1, 2});
  for (int i = 0; i < 300; ++i) {
    const int u = static_cast<int>(rng.below(3));
    const Vec x = random_unit(d, rng);
    const double r = rng.range(-1.0, 1.0);
    states[static_cast<std::size_t>(u)].observe(x, r);
    agg.observe(x, r);
  }
  const ClusterAggregate rebuilt = ClusterAggregate::from_states(states, {0, 1, 2});
  REQUIRE((agg.fwd() - rebuilt.fwd()).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((agg.inv() - rebuilt.inv()).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((agg.weight() - rebuilt.weight()).cwiseAbs().maxCoeff() < 1e-9);
}
