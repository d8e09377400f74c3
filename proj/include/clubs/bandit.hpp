#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace clubs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Candidate items offered in one round. item_ids is populated only by the
// replay pipeline, where featureless baselines need discrete identities;
// synthetic rounds leave it empty.
struct ContextSet {
  std::vector<Vec> vectors;
  std::vector<int> item_ids;
  long round = 0;

  int size() const { return static_cast<int>(vectors.size()); }
};

// Regularized least-squares state of one user. The correlation matrix starts
// at the identity and absorbs a rank-one term per served round; its inverse
// is maintained incrementally (Sherman-Morrison) next to the forward matrix,
// which is kept so cluster aggregates can be rebuilt by plain summation.
class BanditState {
 public:
  explicit BanditState(int dim)
      : fwd_(Mat::Identity(dim, dim)),
        inv_(Mat::Identity(dim, dim)),
        bias_(Vec::Zero(dim)),
        weight_(Vec::Zero(dim)) {
    if (dim < 1) throw std::invalid_argument("BanditState: dim must be >= 1");
  }

  int dim() const { return static_cast<int>(bias_.size()); }
  const Mat& fwd() const { return fwd_; }
  const Mat& inv() const { return inv_; }
  const Vec& bias() const { return bias_; }
  const Vec& weight() const { return weight_; }
  long serves() const { return serves_; }

  void observe(const Vec& x, double payoff) {
    if (x.size() != bias_.size())
      throw std::invalid_argument("BanditState::observe: dimension mismatch");
    if (!x.allFinite() || !std::isfinite(payoff))
      throw std::invalid_argument("BanditState::observe: non-finite input");
    const Vec inv_x = inv_ * x;
    const double denom = 1.0 + x.dot(inv_x);
    inv_.noalias() -= (inv_x * inv_x.transpose()) / denom;
    fwd_.noalias() += x * x.transpose();
    bias_ += payoff * x;
    ++serves_;
    if (++since_refresh_ >= kRefreshInterval) refresh();
    weight_.noalias() = inv_ * bias_;
  }

 private:
  // Rank-one updates accumulate roundoff; a periodic full re-inversion keeps
  // the maintained inverse within tolerance on long runs.
  static constexpr long kRefreshInterval = 10000;

  void refresh() {
    Mat fresh = fwd_.llt().solve(Mat::Identity(dim(), dim()));
    inv_ = 0.5 * (fresh + fresh.transpose());
    since_refresh_ = 0;
  }

  Mat fwd_, inv_;
  Vec bias_, weight_;
  long serves_ = 0;
  long since_refresh_ = 0;
};

// Pooled least-squares view of one cluster, equivalent to collapsing its
// members into a single user: fwd = I + sum_i (M_i - I), bias = sum_i b_i.
class ClusterAggregate {
 public:
  // Empty shell; usable only after assignment from from_states.
  ClusterAggregate() = default;

  // Builds from scratch by summation plus one dense inversion. A singleton
  // cluster copies the member's maintained inverse verbatim, so a graph with
  // no edges reproduces the independent per-user policy exactly.
  static ClusterAggregate from_states(const std::vector<BanditState>& states,
                                      const std::vector<int>& members) {
    if (members.empty())
      throw std::invalid_argument("ClusterAggregate: empty member list");
    for (int i : members)
      if (i < 0 || i >= static_cast<int>(states.size()))
        throw std::invalid_argument("ClusterAggregate: member out of range");
    ClusterAggregate agg;
    agg.members_ = members;
    std::sort(agg.members_.begin(), agg.members_.end());
    const int d = states[members[0]].dim();
    if (members.size() == 1) {
      const BanditState& s = states[members[0]];
      agg.fwd_ = s.fwd();
      agg.inv_ = s.inv();
      agg.bias_ = s.bias();
      agg.weight_ = s.weight();
      return agg;
    }
    agg.fwd_ = Mat::Identity(d, d);
    agg.bias_ = Vec::Zero(d);
    for (int i : agg.members_) {
      agg.fwd_ += states[i].fwd() - Mat::Identity(d, d);
      agg.bias_ += states[i].bias();
    }
    Mat inv = agg.fwd_.llt().solve(Mat::Identity(d, d));
    agg.inv_ = 0.5 * (inv + inv.transpose());
    agg.weight_ = agg.inv_ * agg.bias_;
    return agg;
  }

  int dim() const { return static_cast<int>(bias_.size()); }
  const Mat& fwd() const { return fwd_; }
  const Mat& inv() const { return inv_; }
  const Vec& bias() const { return bias_; }
  const Vec& weight() const { return weight_; }
  const std::vector<int>& members() const { return members_; }

  // Same rank-one form as the per-user update; keeps the aggregate in sync
  // with its members between full rebuilds.
  void observe(const Vec& x, double payoff) {
    if (x.size() != bias_.size())
      throw std::invalid_argument("ClusterAggregate::observe: dimension mismatch");
    if (!x.allFinite() || !std::isfinite(payoff))
      throw std::invalid_argument("ClusterAggregate::observe: non-finite input");
    const Vec inv_x = inv_ * x;
    const double denom = 1.0 + x.dot(inv_x);
    inv_.noalias() -= (inv_x * inv_x.transpose()) / denom;
    fwd_.noalias() += x * x.transpose();
    bias_ += payoff * x;
    weight_.noalias() = inv_ * bias_;
  }

 private:
  Mat fwd_, inv_;
  Vec bias_, weight_;
  std::vector<int> members_;
};

// Optimism bonus: alpha * sqrt(x' inv x * log(t + 1)). Zero when t = 0.
inline double confidence_width(const Vec& x, const Mat& inv, long t, double alpha) {
  if (t < 0) throw std::invalid_argument("confidence_width: t must be >= 0");
  if (alpha <= 0.0) throw std::invalid_argument("confidence_width: alpha must be > 0");
  const double quad = std::max(0.0, x.dot(inv * x));
  return alpha * std::sqrt(quad * std::log(static_cast<double>(t) + 1.0));
}

// UCB selection over the candidate set: argmax of estimate plus bonus,
// lowest index on exact ties.
inline int select_item(const Vec& weight, const Mat& inv, const ContextSet& ctx,
                       long t, double alpha) {
  if (ctx.vectors.empty())
    throw std::invalid_argument("select_item: empty context set");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < ctx.size(); ++k) {
    const Vec& x = ctx.vectors[k];
    const double score = weight.dot(x) + confidence_width(x, inv, t, alpha);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

// Edge deletion radius for a user served `serve_count` times:
// alpha2 * sqrt((1 + log(1 + T)) / (1 + T)). Decreasing in T.
inline double deletion_threshold(long serve_count, double alpha2) {
  if (serve_count < 0)
    throw std::invalid_argument("deletion_threshold: negative serve count");
  if (alpha2 <= 0.0)
    throw std::invalid_argument("deletion_threshold: alpha2 must be > 0");
  const double tp1 = static_cast<double>(serve_count) + 1.0;
  return alpha2 * std::sqrt((1.0 + std::log(tp1)) / tp1);
}

inline void rank_one_update(BanditState& state, const Vec& x, double payoff) {
  state.observe(x, payoff);
}

inline ClusterAggregate build_aggregate(const std::vector<BanditState>& states,
                                        const std::vector<int>& members) {
  return ClusterAggregate::from_states(states, members);
}

inline double confidence_width(const Vec& x, const ClusterAggregate& agg,
                               long t, double alpha) {
  return confidence_width(x, agg.inv(), t, alpha);
}

// Round index comes from the context set itself.
inline int select_item(const ClusterAggregate& agg, const ContextSet& ctx,
                       double alpha) {
  return select_item(agg.weight(), agg.inv(), ctx, ctx.round, alpha);
}

}  // namespace clubs
