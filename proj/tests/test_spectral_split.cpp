#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"
#include "clubs/spectral_split.hpp"
#include "clubs/user_graph.hpp"
#include "support/test_util.hpp"

using clubs::BanditState;
using clubs::ClusterAggregate;
using clubs::Mat;
using clubs::Rng;
using clubs::SplitOutcome;
using clubs::SplitPlan;
using clubs::UserGraph;
using clubs::Vec;

namespace {

// Keeps exactly `wanted` edges of a complete graph, deleting the rest.
UserGraph carve(int n, const std::set<std::pair<int, int>>& wanted) {
  UserGraph g = UserGraph::complete(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (wanted.count({i, j}) == 0) g.delete_edge(i, j);
  return g;
}

std::set<std::pair<int, int>> barbell_edges() {
  std::set<std::pair<int, int>> e;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) e.insert({i, j});
  for (int i = 5; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) e.insert({i, j});
  e.insert({4, 5});
  return e;
}

bool part_is_connected(const UserGraph& g, const std::vector<int>& part) {
  if (part.empty()) return false;
  std::set<int> inside(part.begin(), part.end());
  std::set<int> seen{part[0]};
  std::vector<int> queue{part[0]};
  for (std::size_t head = 0; head < queue.size(); ++head)
    for (int nb : g.neighbors(queue[head]))
      if (inside.count(nb) && !seen.count(nb)) {
        seen.insert(nb);
        queue.push_back(nb);
      }
  return seen.size() == part.size();
}

// Full enumeration of the edges crossing (part_a, part_b).
std::vector<std::pair<int, int>> crossing_edges(const UserGraph& g,
                                                const std::vector<int>& part_a) {
  std::set<int> in_a(part_a.begin(), part_a.end());
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < g.size(); ++i)
    for (int j : g.neighbors(i))
      if (j > i && in_a.count(i) != in_a.count(j))
        out.emplace_back(i, j);
  std::sort(out.begin(), out.end());
  return out;
}

void check_plan(const UserGraph& g, int cluster_id, const SplitPlan& plan) {
  REQUIRE(plan.cluster_id == cluster_id);
  REQUIRE_FALSE(plan.part_a.empty());
  REQUIRE_FALSE(plan.part_b.empty());
  REQUIRE(std::is_sorted(plan.part_a.begin(), plan.part_a.end()));
  REQUIRE(std::is_sorted(plan.part_b.begin(), plan.part_b.end()));
  std::vector<int> merged;
  std::merge(plan.part_a.begin(), plan.part_a.end(), plan.part_b.begin(),
             plan.part_b.end(), std::back_inserter(merged));
  REQUIRE(merged == g.cluster_members(cluster_id));
  REQUIRE(std::adjacent_find(merged.begin(), merged.end()) == merged.end());
  REQUIRE(part_is_connected(g, plan.part_a));
  REQUIRE(part_is_connected(g, plan.part_b));
  REQUIRE(plan.cut_edges == crossing_edges(g, plan.part_a));
}

}  // namespace

TEST_CASE("barbell graph splits at the bridge", "[split]") {
  UserGraph g = carve(10, barbell_edges());
  REQUIRE(g.cluster_count() == 1);
  Rng rng(42);
  const SplitPlan plan = clubs::bisect_component(g, 0, rng);
  check_plan(g, 0, plan);
  const std::vector<int> lo{0, 1, 2, 3, 4}, hi{5, 6, 7, 8, 9};
  REQUIRE(((plan.part_a == lo && plan.part_b == hi) ||
           (plan.part_a == hi && plan.part_b == lo)));
  REQUIRE(plan.cut_edges == std::vector<std::pair<int, int>>{{4, 5}});
}

TEST_CASE("path of four cuts one edge", "[split]") {
  UserGraph g = carve(4, {{0, 1}, {1, 2}, {2, 3}});
  Rng rng(7);
  const SplitPlan plan = clubs::bisect_component(g, 0, rng);
  check_plan(g, 0, plan);
  REQUIRE(plan.cut_edges.size() == 1);
  REQUIRE(plan.part_a.size() == 2);
  REQUIRE(plan.part_b.size() == 2);
}

TEST_CASE("tiny clusters fall back to BFS halves", "[split]") {
  UserGraph pair = carve(2, {{0, 1}});
  Rng rng(3);
  const SplitPlan p2 = clubs::bisect_component(pair, 0, rng);
  REQUIRE(p2.part_a == std::vector<int>{0});
  REQUIRE(p2.part_b == std::vector<int>{1});
  REQUIRE(p2.cut_edges == std::vector<std::pair<int, int>>{{0, 1}});

  UserGraph tri = UserGraph::complete(3);
  const SplitPlan p3 = clubs::bisect_component(tri, 0, rng);
  check_plan(tri, 0, p3);
  REQUIRE(p3.part_a.size() + p3.part_b.size() == 3);

  UserGraph lone = UserGraph::complete(1);
  REQUIRE_THROWS_AS(clubs::bisect_component(lone, 0, rng), std::invalid_argument);
}

TEST_CASE("plans on fuzzed graphs satisfy every invariant", "[split]") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int n = 4 + static_cast<int>(seed * 3);
    UserGraph g = UserGraph::sparsified(n, seed);
    // Thin the graph a little so clusters are not always complete.
    Rng rng(clubs::derive_seed(seed, 1001));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (g.has_edge(i, j) && rng.bernoulli(0.3)) g.delete_edge(i, j);
    for (int c = 0; c < g.cluster_count(); ++c) {
      if (g.cluster_members(c).size() < 2) continue;
      const SplitPlan plan = clubs::bisect_component(g, c, rng);
      check_plan(g, c, plan);
    }
  }
}

TEST_CASE("identical rng state reproduces the plan", "[split]") {
  UserGraph g = UserGraph::sparsified(40, 9);
  Rng r1(55), r2(55);
  const SplitPlan a = clubs::bisect_component(g, 0, r1);
  const SplitPlan b = clubs::bisect_component(g, 0, r2);
  REQUIRE(a.part_a == b.part_a);
  REQUIRE(a.part_b == b.part_b);
  REQUIRE(a.cut_edges == b.cut_edges);
}

TEST_CASE("applying a split conserves the pooled statistics", "[split]") {
  const int d = 6;
  for (std::uint64_t trial = 1; trial <= 20; ++trial) {
    const int n = 6 + static_cast<int>(trial % 7) * 4;
    UserGraph g = UserGraph::sparsified(n, trial);
    Rng rng(clubs::derive_seed(trial, 2002));
    std::vector<BanditState> states(static_cast<std::size_t>(n), BanditState(d));
    for (int i = 0; i < 25 * n; ++i) {
      Vec x(d);
      for (int k = 0; k < d; ++k) x[k] = rng.gaussian();
      x /= x.norm();
      states[static_cast<std::size_t>(rng.below(n))].observe(x, rng.range(-1.0, 1.0));
    }
    const ClusterAggregate before = ClusterAggregate::from_states(
        states, g.cluster_members(0));
    const int old_count = g.cluster_count();

    const SplitPlan plan = clubs::bisect_component(g, 0, rng);
    const SplitOutcome out = clubs::apply_split(g, plan, states);

    REQUIRE(g.cluster_count() == old_count + 1);
    REQUIRE(g.cluster_members(out.cluster_a) == plan.part_a);
    REQUIRE(g.cluster_members(out.cluster_b) == plan.part_b);

    // (fwd - I) and bias are additive over the two halves.
    const Mat lhs = (out.agg_a.fwd() - Mat::Identity(d, d)) +
                    (out.agg_b.fwd() - Mat::Identity(d, d));
    const Mat rhs = before.fwd() - Mat::Identity(d, d);
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE(((out.agg_a.bias() + out.agg_b.bias()) - before.bias())
                .cwiseAbs()
                .maxCoeff() < 1e-9);
  }
}

TEST_CASE("stale or foreign plans are rejected", "[split]") {
  UserGraph g = UserGraph::complete(6);
  Rng rng(11);
  std::vector<BanditState> states(6, BanditState(3));
  SplitPlan plan = clubs::bisect_component(g, 0, rng);
  SplitPlan wrong = plan;
  wrong.part_a.push_back(99);
  REQUIRE_THROWS_AS(clubs::apply_split(g, wrong, states), std::invalid_argument);
  SplitPlan dropped = plan;
  dropped.part_b.clear();
  REQUIRE_THROWS_AS(clubs::apply_split(g, dropped, states), std::invalid_argument);
  // The intact plan still applies.
  const SplitOutcome out = clubs::apply_split(g, plan, states);
  REQUIRE(g.cluster_count() == 2);
  REQUIRE(out.agg_a.members() == plan.part_a);
  REQUIRE(out.agg_b.members() == plan.part_b);
}
