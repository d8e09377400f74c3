#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"
#include "clubs/user_graph.hpp"

namespace clubs {

// Proposed two-way split of one cluster. Parts are sorted, disjoint, both
// nonempty, each internally connected, and their union is the cluster.
// cut_edges lists every edge crossing the parts as (min, max) pairs.
struct SplitPlan {
  int cluster_id = 0;
  std::vector<int> part_a;
  std::vector<int> part_b;
  std::vector<std::pair<int, int>> cut_edges;
};

// Result of applying a plan: the ids the two parts ended up under, plus
// freshly built aggregates for both.
struct SplitOutcome {
  int cluster_a = 0;
  int cluster_b = 0;
  ClusterAggregate agg_a;
  ClusterAggregate agg_b;
};

namespace detail {

// Fiedler-style direction via power iteration on B = (2 dmax + 1) I - L,
// deflated against the constant vector. The shift keeps B positive definite
// and pushes the smallest Laplacian eigenvalues to the top of B's spectrum.
// Returns false when iteration fails to settle.
inline bool fiedler_direction(const std::vector<std::vector<int>>& nbrs,
                              const std::vector<int>& degree, Rng& rng,
                              std::vector<double>& out) {
  const int k = static_cast<int>(degree.size());
  const double shift =
      2.0 * static_cast<double>(*std::max_element(degree.begin(), degree.end())) + 1.0;
  const double inv_k = 1.0 / static_cast<double>(k);
  std::vector<double> v(k), w(k);
  auto center_normalize = [&](std::vector<double>& z) {
    double mean = 0.0;
    for (double x : z) mean += x;
    mean *= inv_k;
    double norm2 = 0.0;
    for (double& x : z) {
      x -= mean;
      norm2 += x * x;
    }
    const double norm = std::sqrt(norm2);
    if (norm < 1e-12) return false;
    for (double& x : z) x /= norm;
    return true;
  };
  bool seeded = false;
  for (int attempt = 0; attempt < 4 && !seeded; ++attempt) {
    for (double& x : v) x = rng.gaussian();
    seeded = center_normalize(v);
  }
  if (!seeded) return false;
  for (int iter = 0; iter < 500; ++iter) {
    for (int u = 0; u < k; ++u) {
      double acc = (shift - static_cast<double>(degree[u])) * v[u];
      for (int nb : nbrs[u]) acc += v[nb];
      w[u] = acc;
    }
    if (!center_normalize(w)) return false;
    double dist_plus = 0.0, dist_minus = 0.0;
    for (int u = 0; u < k; ++u) {
      const double dp = w[u] - v[u];
      const double dm = w[u] + v[u];
      dist_plus += dp * dp;
      dist_minus += dm * dm;
    }
    v = w;
    if (std::min(dist_plus, dist_minus) < 1e-12) {
      out = v;
      return true;
    }
  }
  return false;
}

// Fallback used for tiny clusters or when power iteration does not settle:
// BFS order from the smallest node, first half against the rest.
inline std::vector<char> bfs_halves(const std::vector<std::vector<int>>& nbrs) {
  const int k = static_cast<int>(nbrs.size());
  std::vector<char> seen(k, 0), side(k, 1);
  std::vector<int> order{0};
  seen[0] = 1;
  for (std::size_t head = 0; head < order.size(); ++head)
    for (int nb : nbrs[order[head]])
      if (!seen[nb]) {
        seen[nb] = 1;
        order.push_back(nb);
      }
  const int half = k / 2;
  for (int r = 0; r < half; ++r) side[order[r]] = 0;
  return side;
}

// Moves every disconnected piece of one side, except the largest, to the
// other side. Largest = most nodes, ties broken toward the piece holding the
// smallest node. `target` is the side label being repaired.
inline void keep_largest_piece(const std::vector<std::vector<int>>& nbrs,
                               std::vector<char>& side, char target) {
  const int k = static_cast<int>(nbrs.size());
  std::vector<char> seen(k, 0);
  std::vector<std::vector<int>> pieces;
  for (int s = 0; s < k; ++s) {
    if (side[s] != target || seen[s]) continue;
    std::vector<int> piece{s};
    seen[s] = 1;
    for (std::size_t head = 0; head < piece.size(); ++head)
      for (int nb : nbrs[piece[head]])
        if (side[nb] == target && !seen[nb]) {
          seen[nb] = 1;
          piece.push_back(nb);
        }
    pieces.push_back(std::move(piece));
  }
  if (pieces.size() <= 1) return;
  std::size_t best = 0;
  for (std::size_t p = 1; p < pieces.size(); ++p)
    if (pieces[p].size() > pieces[best].size()) best = p;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    if (p == best) continue;
    for (int u : pieces[p]) side[u] = static_cast<char>(1 - target);
  }
}

}  // namespace detail

// Splits one cluster of the graph in two along a spectral cut. Uses the
// second-smallest Laplacian direction of the cluster's induced subgraph,
// thresholded at its lower median; nodes sitting exactly on the median are
// balanced between the parts in node-id order. Both parts are then repaired
// to be internally connected (smaller detached pieces migrate across), so
// applying the plan always yields exactly two components.
inline SplitPlan bisect_component(const UserGraph& g, int cluster_id, Rng& rng) {
  const std::vector<int>& members = g.cluster_members(cluster_id);
  const int k = static_cast<int>(members.size());
  if (k < 2)
    throw std::invalid_argument("bisect_component: cluster has fewer than two members");

  // Local adjacency in member order (members are sorted, so local index
  // order is node-id order).
  std::vector<int> local(g.size(), -1);
  for (int s = 0; s < k; ++s) local[members[s]] = s;
  std::vector<std::vector<int>> nbrs(k);
  std::vector<int> degree(k, 0);
  for (int s = 0; s < k; ++s) {
    for (int v : g.neighbors(members[s])) {
      const int lv = local[v];
      if (lv < 0) continue;
      nbrs[s].push_back(lv);
    }
    degree[s] = static_cast<int>(nbrs[s].size());
  }

  std::vector<char> side;
  std::vector<double> dir;
  if (k >= 4 && detail::fiedler_direction(nbrs, degree, rng, dir)) {
    std::vector<double> sorted(dir);
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(k - 1) / 2];
    side.assign(k, 1);
    int below = 0, above = 0;
    for (int s = 0; s < k; ++s) {
      if (dir[s] < median) {
        side[s] = 0;
        ++below;
      } else if (dir[s] > median) {
        ++above;
      }
    }
    // Nodes exactly at the median go to part_a in node-id order until the
    // sides differ by at most one node; the rest stay in part_b.
    const int at_median = k - below - above;
    const int deficit = above + at_median - below - 1;
    int to_a = std::min(at_median, deficit <= 0 ? 0 : (deficit + 1) / 2);
    for (int s = 0; s < k && to_a > 0; ++s) {
      if (dir[s] == median && side[s] == 1) {
        side[s] = 0;
        --to_a;
      }
    }
  } else {
    side = detail::bfs_halves(nbrs);
  }

  detail::keep_largest_piece(nbrs, side, 1);
  detail::keep_largest_piece(nbrs, side, 0);

  SplitPlan plan;
  plan.cluster_id = cluster_id;
  for (int s = 0; s < k; ++s)
    (side[s] == 0 ? plan.part_a : plan.part_b).push_back(members[s]);
  if (plan.part_a.empty() || plan.part_b.empty())
    throw std::runtime_error("bisect_component: degenerate split");
  for (int s = 0; s < k; ++s) {
    if (side[s] != 0) continue;
    for (int nb : nbrs[s])
      if (side[nb] == 1)
        plan.cut_edges.emplace_back(std::min(members[s], members[nb]),
                                    std::max(members[s], members[nb]));
  }
  std::sort(plan.cut_edges.begin(), plan.cut_edges.end());
  return plan;
}

// Applies a plan produced against the current graph state: removes the cut,
// which relabels exactly one of the parts, and rebuilds both aggregates from
// the member states. Throws if the plan is stale or malformed.
inline SplitOutcome apply_split(UserGraph& g, const SplitPlan& plan,
                                const std::vector<BanditState>& states) {
  const std::vector<int>& members = g.cluster_members(plan.cluster_id);
  std::vector<int> merged;
  merged.reserve(plan.part_a.size() + plan.part_b.size());
  std::merge(plan.part_a.begin(), plan.part_a.end(), plan.part_b.begin(),
             plan.part_b.end(), std::back_inserter(merged));
  if (merged != members || plan.part_a.empty() || plan.part_b.empty())
    throw std::invalid_argument("apply_split: plan does not match the cluster");

  std::vector<SplitEvent> events = g.remove_cross_edges(plan.part_a, plan.part_b);
  if (events.size() != 1)
    throw std::runtime_error("apply_split: plan parts were not connected");

  SplitOutcome out;
  const SplitEvent& ev = events.front();
  const bool moved_is_a = ev.moved == plan.part_a;
  out.cluster_a = moved_is_a ? ev.new_cluster : ev.old_cluster;
  out.cluster_b = moved_is_a ? ev.old_cluster : ev.new_cluster;
  out.agg_a = ClusterAggregate::from_states(states, plan.part_a);
  out.agg_b = ClusterAggregate::from_states(states, plan.part_b);
  return out;
}

}  // namespace clubs
