#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"

namespace clubs {

enum class Arrivals { kUniform, kPowerLaw };

struct EnvConfig {
  int users = 0;
  int clusters = 1;
  int dim = 1;
  double gamma = 0.0;       // minimal distance between cluster parameters
  double sigma = 0.0;       // payoff noise scale (uniform, sd = sigma)
  int context_size = 10;
  Arrivals arrivals = Arrivals::kUniform;
  double power_exponent = 1.5;
  std::vector<int> cluster_sizes;  // empty: near-equal split
  std::uint64_t seed = 0;
};

// Clustered linear-payoff world. Hidden state (cluster parameters and the
// user assignment) is fixed at construction from cfg.seed; per-round
// randomness (arrivals, contexts, noise) comes from the Rng handed into each
// call, so several independent runs can share one hidden world.
class SyntheticEnv {
 public:
  static SyntheticEnv make(const EnvConfig& cfg) {
    validate(cfg);
    SyntheticEnv env;
    env.cfg_ = cfg;
    Rng rng(derive_seed(cfg.seed, 0x656e76ULL));  // hidden-state stream
    env.params_ = sample_parameters(cfg, rng);
    env.assignment_ = assign_users(cfg);
    if (cfg.arrivals == Arrivals::kPowerLaw) {
      env.arrival_cdf_.resize(cfg.users);
      double total = 0.0;
      for (int i = 0; i < cfg.users; ++i) {
        total += std::pow(static_cast<double>(i + 1), -cfg.power_exponent);
        env.arrival_cdf_[i] = total;
      }
      for (double& c : env.arrival_cdf_) c /= total;
      env.arrival_cdf_.back() = 1.0;
    }
    return env;
  }

  int users() const { return cfg_.users; }
  int clusters() const { return cfg_.clusters; }
  int dim() const { return cfg_.dim; }
  int context_size() const { return cfg_.context_size; }
  const EnvConfig& config() const { return cfg_; }

  int cluster_of(int user) const {
    check_user(user);
    return assignment_[user];
  }
  const std::vector<int>& assignment() const { return assignment_; }
  const Vec& parameter(int cluster) const {
    if (cluster < 0 || cluster >= cfg_.clusters)
      throw std::invalid_argument("SyntheticEnv: cluster out of range");
    return params_[cluster];
  }
  const Vec& user_parameter(int user) const { return params_[cluster_of(user)]; }

  int sample_user(Rng& rng) const {
    if (arrival_cdf_.empty()) return static_cast<int>(rng.below(cfg_.users));
    const double u = rng.unit();
    const auto it = std::upper_bound(arrival_cdf_.begin(), arrival_cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(
        it - arrival_cdf_.begin(), cfg_.users - 1));
  }

  ContextSet sample_contexts(long t, Rng& rng) const {
    ContextSet ctx;
    ctx.round = t;
    ctx.vectors.reserve(cfg_.context_size);
    for (int k = 0; k < cfg_.context_size; ++k)
      ctx.vectors.push_back(unit_vector(cfg_.dim, rng));
    return ctx;
  }

  std::pair<int, ContextSet> sample_round(long t, Rng& rng) const {
    const int user = sample_user(rng);
    return {user, sample_contexts(t, rng)};
  }

  // Noisy clipped linear payoff: clamp(u . x + eps, -1, 1) with eps uniform
  // on [-sigma sqrt(3), sigma sqrt(3)] (zero mean, sd = sigma).
  double payoff(int user, const Vec& x, Rng& rng) const {
    check_user(user);
    if (x.size() != cfg_.dim || !x.allFinite())
      throw std::invalid_argument("SyntheticEnv::payoff: bad context vector");
    double a = params_[assignment_[user]].dot(x);
    if (cfg_.sigma > 0.0) {
      const double half = cfg_.sigma * std::sqrt(3.0);
      a += rng.range(-half, half);
    }
    return std::clamp(a, -1.0, 1.0);
  }

  // Noise-free gap to the best candidate. Nonnegative by construction.
  double instant_regret(int user, const ContextSet& ctx, int chosen) const {
    check_user(user);
    if (ctx.vectors.empty() || chosen < 0 || chosen >= ctx.size())
      throw std::invalid_argument("SyntheticEnv::instant_regret: bad choice");
    const Vec& u = params_[assignment_[user]];
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec& x : ctx.vectors) best = std::max(best, u.dot(x));
    return best - u.dot(ctx.vectors[chosen]);
  }

  static Vec unit_vector(int dim, Rng& rng) {
    Vec v(dim);
    while (true) {
      for (int i = 0; i < dim; ++i) v[i] = rng.gaussian();
      const double norm = v.norm();
      if (norm > 1e-12) return v / norm;
    }
  }

 private:
  SyntheticEnv() = default;

  static void validate(const EnvConfig& cfg) {
    if (cfg.users < 1) throw std::invalid_argument("env: users must be >= 1");
    if (cfg.clusters < 1 || cfg.clusters > cfg.users)
      throw std::invalid_argument("env: clusters must be in [1, users]");
    if (cfg.dim < 1) throw std::invalid_argument("env: dim must be >= 1");
    if (cfg.gamma < 0.0) throw std::invalid_argument("env: gamma must be >= 0");
    if (cfg.clusters > 1 && cfg.gamma > 2.0)
      throw std::invalid_argument("env: gamma > 2 is unsatisfiable on the unit sphere");
    if (cfg.sigma < 0.0) throw std::invalid_argument("env: sigma must be >= 0");
    if (cfg.context_size < 1)
      throw std::invalid_argument("env: context_size must be >= 1");
    if (cfg.arrivals == Arrivals::kPowerLaw && cfg.power_exponent <= 0.0)
      throw std::invalid_argument("env: power_exponent must be > 0");
    if (!cfg.cluster_sizes.empty()) {
      if (static_cast<int>(cfg.cluster_sizes.size()) != cfg.clusters)
        throw std::invalid_argument("env: cluster_sizes length must equal clusters");
      int total = 0;
      for (int s : cfg.cluster_sizes) {
        if (s < 1) throw std::invalid_argument("env: cluster sizes must be >= 1");
        total += s;
      }
      if (total != cfg.users)
        throw std::invalid_argument("env: cluster sizes must sum to users");
    }
  }

  // Rejection-samples cluster parameters on the unit sphere until every pair
  // is at least gamma apart. Two clusters at the maximal separation get the
  // antipodal construction directly.
  static std::vector<Vec> sample_parameters(const EnvConfig& cfg, Rng& rng) {
    const int m = cfg.clusters;
    std::vector<Vec> params;
    if (m == 2 && cfg.gamma >= 2.0) {
      const Vec u = unit_vector(cfg.dim, rng);
      params.push_back(u);
      params.push_back(-u);
      return params;
    }
    for (int attempt = 0; attempt < 10000; ++attempt) {
      params.clear();
      for (int j = 0; j < m; ++j) params.push_back(unit_vector(cfg.dim, rng));
      bool ok = true;
      for (int a = 0; a < m && ok; ++a)
        for (int b = a + 1; b < m && ok; ++b)
          if ((params[a] - params[b]).norm() < cfg.gamma) ok = false;
      if (ok) return params;
    }
    throw std::runtime_error(
        "env: could not satisfy the separation gamma=" + std::to_string(cfg.gamma) +
        " after 10000 attempts");
  }

  static std::vector<int> assign_users(const EnvConfig& cfg) {
    std::vector<int> sizes = cfg.cluster_sizes;
    if (sizes.empty()) {
      sizes.assign(cfg.clusters, cfg.users / cfg.clusters);
      for (int j = 0; j < cfg.users % cfg.clusters; ++j) ++sizes[j];
    }
    std::vector<int> assignment;
    assignment.reserve(cfg.users);
    for (int j = 0; j < cfg.clusters; ++j)
      assignment.insert(assignment.end(), sizes[j], j);
    return assignment;
  }

  void check_user(int user) const {
    if (user < 0 || user >= cfg_.users)
      throw std::invalid_argument("SyntheticEnv: user out of range");
  }

  EnvConfig cfg_;
  std::vector<Vec> params_;
  std::vector<int> assignment_;
  std::vector<double> arrival_cdf_;
};

// Sanity numbers for a constructed environment: the empirical minimum
// eigenvalue of E[x x'] under the context sampler (should approach 1/dim)
// and the realized cluster sizes.
struct EnvDiagnostics {
  double min_eigenvalue = 0.0;
  std::vector<long> cluster_sizes;
};

inline EnvDiagnostics diagnose(const SyntheticEnv& env, long samples, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("diagnose: samples must be >= 1");
  const int d = env.dim();
  Mat second_moment = Mat::Zero(d, d);
  for (long s = 0; s < samples; ++s) {
    const Vec x = SyntheticEnv::unit_vector(d, rng);
    second_moment.noalias() += x * x.transpose();
  }
  second_moment /= static_cast<double>(samples);
  Eigen::SelfAdjointEigenSolver<Mat> es(second_moment);
  EnvDiagnostics diag;
  diag.min_eigenvalue = es.eigenvalues().minCoeff();
  diag.cluster_sizes.assign(env.clusters(), 0);
  for (int u = 0; u < env.users(); ++u) ++diag.cluster_sizes[env.cluster_of(u)];
  return diag;
}

}  // namespace clubs
