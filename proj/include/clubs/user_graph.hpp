#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <vector>

#include "clubs/rng.hpp"

namespace clubs {

// Records one component split: `moved` members were relabeled from
// `old_cluster` to the freshly appended `new_cluster`, `kept` stayed put.
// Both lists are sorted ascending.
struct SplitEvent {
  int old_cluster = 0;
  int new_cluster = 0;
  std::vector<int> kept;
  std::vector<int> moved;
};

// Undirected user graph under edge deletions. Connected components double as
// the clusters, with labels maintained eagerly so connectivity queries are
// O(1). A spanning forest makes the common case cheap: deleting a non-forest
// edge can never split a component. Deleting a forest edge triggers two
// alternating searches from the endpoints; the side that exhausts first is
// the smaller one, and either a replacement edge reconnects it or its
// members are relabeled.
class UserGraph {
 public:
  static UserGraph complete(int n) {
    UserGraph g(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) g.add_edge(i, j);
    g.finish_init();
    return g;
  }

  // Connected sparse random graph: per-row Erdos-Renyi sampling with
  // p = 3 ln n / n (geometric gap skipping) plus a random Hamiltonian path
  // to guarantee a single component. Graphs with at most 32 nodes stay
  // complete; the constant is small enough there that sparsifying buys
  // nothing.
  static UserGraph sparsified(int n, std::uint64_t seed) {
    if (n <= 32) return complete(n);
    UserGraph g(n);
    Rng rng(seed);
    const double p = std::min(1.0, 3.0 * std::log(static_cast<double>(n)) /
                                       static_cast<double>(n));
    const double log_q = std::log1p(-p);
    for (int i = 0; i < n; ++i) {
      long j = i;
      while (true) {
        const double u = std::max(rng.unit(), 1e-300);
        j += 1 + static_cast<long>(std::floor(std::log(u) / log_q));
        if (j >= n) break;
        g.add_edge(i, static_cast<int>(j));
      }
    }
    std::vector<int> path(n);
    for (int i = 0; i < n; ++i) path[i] = i;
    rng.shuffle(path);
    for (int i = 0; i + 1 < n; ++i) g.add_edge(path[i], path[i + 1]);
    g.finish_init();
    return g;
  }

  int size() const { return n_; }
  long edge_count() const { return edges_; }
  int cluster_count() const { return static_cast<int>(clusters_.size()); }

  int cluster_of(int i) const {
    check_node(i);
    return cluster_of_[i];
  }

  const std::vector<int>& cluster_members(int c) const {
    if (c < 0 || c >= cluster_count())
      throw std::invalid_argument("UserGraph: cluster id out of range");
    return clusters_[c];
  }

  // All clusters, indexed by id. Member lists are sorted.
  const std::vector<std::vector<int>>& components() const { return clusters_; }

  const std::set<int>& neighbors(int i) const {
    check_node(i);
    return adj_[i];
  }

  bool has_edge(int i, int l) const {
    check_node(i);
    check_node(l);
    return adj_[i].count(l) > 0;
  }

  bool is_connected(int i, int l) const {
    check_node(i);
    check_node(l);
    return cluster_of_[i] == cluster_of_[l];
  }

  // Deletes (i, l) if present; no-op otherwise. Returns the split event when
  // the deletion disconnects the component.
  std::optional<SplitEvent> delete_edge(int i, int l) {
    check_node(i);
    check_node(l);
    if (i == l || adj_[i].count(l) == 0) return std::nullopt;
    adj_[i].erase(l);
    adj_[l].erase(i);
    --edges_;
    if (forest_[i].count(l) == 0) return std::nullopt;
    forest_[i].erase(l);
    forest_[l].erase(i);
    return split_or_reconnect(i, l);
  }

  // Deletes every edge (user, l) whose far endpoint fails the keep test.
  // Neighbors are visited in ascending order on a snapshot taken up front.
  template <class Pred>
  std::vector<SplitEvent> delete_edges_for_user(int user, Pred&& should_delete) {
    check_node(user);
    const std::vector<int> snapshot(adj_[user].begin(), adj_[user].end());
    std::vector<SplitEvent> events;
    for (int l : snapshot) {
      if (!should_delete(l)) continue;
      if (auto ev = delete_edge(user, l)) events.push_back(std::move(*ev));
    }
    return events;
  }

  // Deletes every edge with one endpoint in `a` and the other in `b`.
  // Membership is tracked locally because delete_edge may recycle the shared
  // scratch marks while splitting.
  std::vector<SplitEvent> remove_cross_edges(const std::vector<int>& a,
                                             const std::vector<int>& b) {
    std::vector<char> in_b(n_, 0);
    for (int v : b) {
      check_node(v);
      in_b[v] = 1;
    }
    std::vector<int> left(a);
    std::sort(left.begin(), left.end());
    std::vector<SplitEvent> events;
    for (int u : left) {
      check_node(u);
      const std::vector<int> snapshot(adj_[u].begin(), adj_[u].end());
      for (int v : snapshot) {
        if (!in_b[v]) continue;
        if (auto ev = delete_edge(u, v)) events.push_back(std::move(*ev));
      }
    }
    return events;
  }

  // One "i j" pair per line, i < j, ascending.
  void dump_edges(std::ostream& os) const {
    for (int i = 0; i < n_; ++i)
      for (int j : adj_[i])
        if (j > i) os << i << ' ' << j << '\n';
  }

 private:
  explicit UserGraph(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("UserGraph: need at least one node");
    adj_.resize(n);
    forest_.resize(n);
    cluster_of_.assign(n, -1);
    mark_.assign(n, 0);
  }

  void check_node(int i) const {
    if (i < 0 || i >= n_) throw std::invalid_argument("UserGraph: node out of range");
  }

  void add_edge(int i, int l) {
    if (i == l) return;
    if (adj_[i].insert(l).second) {
      adj_[l].insert(i);
      ++edges_;
    }
  }

  // Builds the spanning forest and initial cluster labels by BFS.
  void finish_init() {
    int next_cluster = 0;
    std::vector<int> queue;
    for (int s = 0; s < n_; ++s) {
      if (cluster_of_[s] != -1) continue;
      const int c = next_cluster++;
      queue.assign(1, s);
      cluster_of_[s] = c;
      std::vector<int> members;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const int u = queue[head];
        members.push_back(u);
        for (int v : adj_[u]) {
          if (cluster_of_[v] != -1) continue;
          cluster_of_[v] = c;
          forest_[u].insert(v);
          forest_[v].insert(u);
          queue.push_back(v);
        }
      }
      std::sort(members.begin(), members.end());
      clusters_.push_back(std::move(members));
    }
  }

  int next_stamp() const { return ++stamp_; }

  // Called after the forest edge (i, l) has been removed. Runs alternating
  // searches over the two detached subtrees; the exhausted side is the
  // smaller one. If any graph edge leaves that side, the first one found (in
  // ascending visit/neighbor order) is promoted into the forest; otherwise
  // the exhausted side becomes a new cluster.
  std::optional<SplitEvent> split_or_reconnect(int i, int l) {
    const int stamp_i = next_stamp();
    const int stamp_l = next_stamp();
    std::vector<int> side_i{i}, side_l{l};
    mark_[i] = stamp_i;
    mark_[l] = stamp_l;
    std::size_t pos_i = 0, pos_l = 0;
    const auto expand = [&](std::vector<int>& side, std::size_t& pos, int stamp) {
      const int u = side[pos++];
      for (int v : forest_[u]) {
        if (mark_[v] == stamp) continue;
        mark_[v] = stamp;
        side.push_back(v);
      }
    };
    std::vector<int>* small = nullptr;
    int small_stamp = 0;
    while (true) {
      if (pos_i == side_i.size()) {
        small = &side_i;
        small_stamp = stamp_i;
        break;
      }
      expand(side_i, pos_i, stamp_i);
      if (pos_l == side_l.size()) {
        small = &side_l;
        small_stamp = stamp_l;
        break;
      }
      expand(side_l, pos_l, stamp_l);
    }
    // Scan the small side's incident edges for one that leaves it.
    for (int u : *small) {
      for (int v : adj_[u]) {
        if (mark_[v] == small_stamp) continue;
        forest_[u].insert(v);
        forest_[v].insert(u);
        return std::nullopt;
      }
    }
    // No replacement: relabel the exhausted side as a new cluster.
    SplitEvent ev;
    ev.old_cluster = cluster_of_[i];
    ev.new_cluster = cluster_count();
    ev.moved = *small;
    std::sort(ev.moved.begin(), ev.moved.end());
    std::vector<int>& old_members = clusters_[ev.old_cluster];
    ev.kept.reserve(old_members.size() - ev.moved.size());
    std::set_difference(old_members.begin(), old_members.end(),
                        ev.moved.begin(), ev.moved.end(),
                        std::back_inserter(ev.kept));
    for (int u : ev.moved) cluster_of_[u] = ev.new_cluster;
    old_members = ev.kept;
    clusters_.push_back(ev.moved);
    return ev;
  }

  int n_ = 0;
  long edges_ = 0;
  std::vector<std::set<int>> adj_;
  std::vector<std::set<int>> forest_;
  std::vector<int> cluster_of_;
  std::vector<std::vector<int>> clusters_;
  mutable std::vector<int> mark_;
  mutable int stamp_ = 0;
};

inline UserGraph init_sparsified(int n, std::uint64_t seed) {
  return UserGraph::sparsified(n, seed);
}

inline bool is_connected(const UserGraph& g, int i, int l) {
  return g.is_connected(i, l);
}

inline std::vector<int> components_of(const UserGraph& g, int i) {
  return g.cluster_members(g.cluster_of(i));
}

}  // namespace clubs
