#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"
#include "clubs/spectral_split.hpp"
#include "clubs/user_graph.hpp"

namespace clubs {

struct PolicyConfig {
  int dimension = 1;
  double alpha = 1.0;
  double alpha2 = 1.0;
  double split_prob = 0.0;          // < 1/2; probability of an exploratory round
  double cold_start_fraction = 0.1; // exploratory splits allowed while t <= frac * horizon
  long horizon = 0;
  bool complete_graph = false;      // start from the complete graph instead of the sparse one
  std::uint64_t graph_seed = 0;
  std::uint64_t policy_seed = 0;

  void validate_linear() const {
    if (dimension < 1) throw std::invalid_argument("policy: dimension must be >= 1");
    if (alpha <= 0.0) throw std::invalid_argument("policy: alpha must be > 0");
  }
  void validate_graph() const {
    validate_linear();
    if (alpha2 <= 0.0) throw std::invalid_argument("policy: alpha2 must be > 0");
    if (split_prob < 0.0 || split_prob >= 0.5)
      throw std::invalid_argument("policy: split_prob must lie in [0, 1/2)");
    if (cold_start_fraction < 0.0 || cold_start_fraction > 1.0)
      throw std::invalid_argument("policy: cold_start_fraction must lie in [0, 1]");
    if (horizon < 0) throw std::invalid_argument("policy: horizon must be >= 0");
  }
};

// One simulated round, as logged by the harness.
struct RoundRecord {
  long t = 0;
  int user = 0;
  int chosen = 0;
  double payoff = 0.0;
  double regret = 0.0;
  int clusters = 1;  // maintained cluster count after the round
};

// Uniform interface over all policies. t is 1-based within a run.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int select(int user, const ContextSet& ctx, long t) = 0;
  virtual void feedback(int user, const ContextSet& ctx, int chosen,
                        double payoff, long t) = 0;
  virtual int cluster_count() const { return 1; }
  virtual std::string_view name() const = 0;
};

// Graph-based clustering policy. In the base mode every feedback round prunes
// edges around the served user whose estimate lies outside the combined
// confidence radius. The exploratory mode flips a coin each round: tails runs
// the pruning step, heads spends the round bisecting a random other cluster
// along a spectral cut, but only during the cold-start prefix of the horizon.
class ClubPolicy : public Policy {
 public:
  ClubPolicy(int n_users, const PolicyConfig& cfg, bool exploratory)
      : cfg_(checked(cfg)),
        exploratory_(exploratory),
        graph_(cfg.complete_graph ? UserGraph::complete(n_users)
                                  : UserGraph::sparsified(n_users, cfg.graph_seed)),
        rng_(derive_seed(cfg.policy_seed, 0x636c7562ULL)),
        states_(static_cast<std::size_t>(n_users), BanditState(cfg.dimension)) {
    aggs_.resize(graph_.cluster_count());
    stale_.resize(graph_.cluster_count(), 0);
  }

  int select(int user, const ContextSet& ctx, long t) override {
    const int c = graph_.cluster_of(user);
    const ClusterAggregate& agg = aggregate(c);
    return select_item(agg.weight(), agg.inv(), ctx, t, cfg_.alpha);
  }

  void feedback(int user, const ContextSet& ctx, int chosen, double payoff,
                long t) override {
    if (chosen < 0 || chosen >= ctx.size())
      throw std::invalid_argument("club: chosen index out of range");
    const Vec& x = ctx.vectors[chosen];
    states_[static_cast<std::size_t>(user)].observe(x, payoff);
    const int c = graph_.cluster_of(user);
    aggregate(c);
    aggs_[c]->observe(x, payoff);
    if (++stale_[c] >= kAggregateRefresh) invalidate(c);

    if (exploratory_ && rng_.bernoulli(cfg_.split_prob)) {
      if (static_cast<double>(t) <=
          cfg_.cold_start_fraction * static_cast<double>(cfg_.horizon))
        exploratory_split(user, t);
      return;
    }
    prune(user);
  }

  int cluster_count() const override { return graph_.cluster_count(); }
  std::string_view name() const override { return exploratory_ ? "gclub" : "club"; }

  const UserGraph& graph() const { return graph_; }
  const BanditState& state(int user) const {
    return states_.at(static_cast<std::size_t>(user));
  }
  const ClusterAggregate& aggregate_of(int user) {
    return aggregate(graph_.cluster_of(user));
  }
  const std::vector<long>& exploratory_split_rounds() const { return split_rounds_; }

  // Deletes every edge, leaving each user in a singleton cluster. With the
  // graph fully shattered the policy reduces to the independent per-user
  // baseline, which is what diagnostics compare against.
  void prune_all_edges() {
    for (int u = 0; u < graph_.size(); ++u) {
      const auto events = graph_.delete_edges_for_user(u, [](int) { return true; });
      on_split_events(events);
    }
  }

 private:
  // Aggregates are rebuilt lazily: splits and staleness only mark them, the
  // next round touching the cluster pays the rebuild.
  static constexpr long kAggregateRefresh = 10000;

  static PolicyConfig checked(const PolicyConfig& cfg) {
    cfg.validate_graph();
    return cfg;
  }

  const ClusterAggregate& aggregate(int c) {
    if (!aggs_[c]) {
      aggs_[c] = ClusterAggregate::from_states(states_, graph_.cluster_members(c));
      stale_[c] = 0;
    }
    return *aggs_[c];
  }

  void invalidate(int c) { aggs_[c].reset(); }

  void on_split_events(const std::vector<SplitEvent>& events) {
    if (events.empty()) return;
    aggs_.resize(graph_.cluster_count());
    stale_.resize(graph_.cluster_count(), 0);
    for (const SplitEvent& ev : events) {
      invalidate(ev.old_cluster);
      invalidate(ev.new_cluster);
    }
  }

  void prune(int user) {
    const BanditState& su = states_[static_cast<std::size_t>(user)];
    const double radius_u = deletion_threshold(su.serves(), cfg_.alpha2);
    const Vec& wu = su.weight();
    const auto events = graph_.delete_edges_for_user(user, [&](int other) {
      const BanditState& so = states_[static_cast<std::size_t>(other)];
      const double gap = (wu - so.weight()).norm();
      return gap > radius_u + deletion_threshold(so.serves(), cfg_.alpha2);
    });
    on_split_events(events);
  }

  void exploratory_split(int user, long t) {
    const int own = graph_.cluster_of(user);
    std::vector<int> eligible;
    for (int c = 0; c < graph_.cluster_count(); ++c)
      if (c != own && graph_.cluster_members(c).size() >= 2) eligible.push_back(c);
    if (eligible.empty()) return;
    const int target = eligible[rng_.below(static_cast<long>(eligible.size()))];
    const SplitPlan plan = bisect_component(graph_, target, rng_);
    SplitOutcome outcome = apply_split(graph_, plan, states_);
    aggs_.resize(graph_.cluster_count());
    stale_.resize(graph_.cluster_count(), 0);
    aggs_[outcome.cluster_a] = std::move(outcome.agg_a);
    aggs_[outcome.cluster_b] = std::move(outcome.agg_b);
    stale_[outcome.cluster_a] = 0;
    stale_[outcome.cluster_b] = 0;
    split_rounds_.push_back(t);
  }

  PolicyConfig cfg_;
  bool exploratory_ = false;
  UserGraph graph_;
  Rng rng_;
  std::vector<BanditState> states_;
  std::vector<std::optional<ClusterAggregate>> aggs_;
  std::vector<long> stale_;
  std::vector<long> split_rounds_;
};

// Contextual UCB without clustering: one shared model, or one per user.
class LinUcbPolicy : public Policy {
 public:
  LinUcbPolicy(int n_users, const PolicyConfig& cfg, bool shared)
      : alpha_(cfg.alpha), shared_(shared) {
    cfg.validate_linear();
    states_.assign(shared ? 1 : static_cast<std::size_t>(n_users),
                   BanditState(cfg.dimension));
  }

  int select(int user, const ContextSet& ctx, long t) override {
    const BanditState& s = state_for(user);
    return select_item(s.weight(), s.inv(), ctx, t, alpha_);
  }

  void feedback(int user, const ContextSet& ctx, int chosen, double payoff,
                long /*t*/) override {
    if (chosen < 0 || chosen >= ctx.size())
      throw std::invalid_argument("linucb: chosen index out of range");
    state_for(user).observe(ctx.vectors[chosen], payoff);
  }

  int cluster_count() const override { return static_cast<int>(states_.size()); }
  std::string_view name() const override {
    return shared_ ? "linucb-one" : "linucb-ind";
  }

  const BanditState& state_for(int user) const {
    return states_.at(shared_ ? 0 : static_cast<std::size_t>(user));
  }

 private:
  BanditState& state_for(int user) {
    return states_.at(shared_ ? 0 : static_cast<std::size_t>(user));
  }

  double alpha_;
  bool shared_;
  std::vector<BanditState> states_;
};

// Featureless UCB1 keyed on discrete item ids; context vectors are ignored.
// Every id unseen in scope is tried once (lowest candidate index first),
// after that the classic mean + sqrt(2 ln t / pulls) score decides.
class Ucb1Policy : public Policy {
 public:
  Ucb1Policy(int n_users, bool shared) : shared_(shared) {
    tables_.resize(shared ? 1 : static_cast<std::size_t>(n_users));
  }

  int select(int user, const ContextSet& ctx, long t) override {
    require_ids(ctx);
    const auto& table = table_for(user);
    for (int k = 0; k < ctx.size(); ++k)
      if (table.find(ctx.item_ids[k]) == table.end()) return k;
    const double lt = std::log(static_cast<double>(std::max<long>(t, 1)));
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < ctx.size(); ++k) {
      const Arm& arm = table.at(ctx.item_ids[k]);
      const double mean = arm.total / static_cast<double>(arm.pulls);
      const double score =
          mean + std::sqrt(2.0 * lt / static_cast<double>(arm.pulls));
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    return best;
  }

  void feedback(int user, const ContextSet& ctx, int chosen, double payoff,
                long /*t*/) override {
    require_ids(ctx);
    if (chosen < 0 || chosen >= ctx.size())
      throw std::invalid_argument("ucb1: chosen index out of range");
    Arm& arm = table_for(user)[ctx.item_ids[chosen]];
    arm.total += payoff;
    ++arm.pulls;
  }

  int cluster_count() const override { return static_cast<int>(tables_.size()); }
  std::string_view name() const override { return shared_ ? "ucb-one" : "ucb-ind"; }

 private:
  struct Arm {
    double total = 0.0;
    long pulls = 0;
  };

  static void require_ids(const ContextSet& ctx) {
    if (ctx.item_ids.size() != ctx.vectors.size() || ctx.item_ids.empty())
      throw std::invalid_argument("ucb1: context set carries no item ids");
  }

  std::unordered_map<int, Arm>& table_for(int user) {
    return tables_.at(shared_ ? 0 : static_cast<std::size_t>(user));
  }
  const std::unordered_map<int, Arm>& table_for(int user) const {
    return tables_.at(shared_ ? 0 : static_cast<std::size_t>(user));
  }

  bool shared_;
  std::vector<std::unordered_map<int, Arm>> tables_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed)
      : rng_(derive_seed(seed, 0x72616eULL)) {}

  int select(int /*user*/, const ContextSet& ctx, long /*t*/) override {
    if (ctx.vectors.empty())
      throw std::invalid_argument("ran: empty context set");
    return static_cast<int>(rng_.below(ctx.size()));
  }

  void feedback(int, const ContextSet&, int, double, long) override {}
  std::string_view name() const override { return "ran"; }

 private:
  Rng rng_;
};

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{
      "club", "gclub", "linucb-one", "linucb-ind", "ucb-one", "ucb-ind", "ran"};
  return names;
}

inline std::unique_ptr<Policy> make_policy(std::string_view name, int n_users,
                                           const PolicyConfig& cfg) {
  if (n_users < 1) throw std::invalid_argument("make_policy: need at least one user");
  if (name == "club") return std::make_unique<ClubPolicy>(n_users, cfg, false);
  if (name == "gclub") return std::make_unique<ClubPolicy>(n_users, cfg, true);
  if (name == "linucb-one") return std::make_unique<LinUcbPolicy>(n_users, cfg, true);
  if (name == "linucb-ind") return std::make_unique<LinUcbPolicy>(n_users, cfg, false);
  if (name == "ucb-one") return std::make_unique<Ucb1Policy>(n_users, true);
  if (name == "ucb-ind") return std::make_unique<Ucb1Policy>(n_users, false);
  if (name == "ran") return std::make_unique<RandomPolicy>(cfg.policy_seed);
  throw std::invalid_argument("make_policy: unknown policy '" + std::string(name) + "'");
}

}  // namespace clubs
