#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "clubs/config.hpp"
#include "clubs/policies.hpp"
#include "clubs/replay_data.hpp"
#include "clubs/synthetic_env.hpp"

namespace clubs {

// Click-through rate over served rounds; payoffs must be exactly 0 or 1.
inline double ctr(const std::vector<RoundRecord>& records) {
  std::vector<double> payoffs;
  payoffs.reserve(records.size());
  for (const RoundRecord& rec : records) payoffs.push_back(rec.payoff);
  return ctr(std::span<const double>(payoffs));
}

enum class Mode { kSynthetic, kReplay };
enum class Metric { kRegret, kCtr };

struct GridPoint {
  double alpha = 0.5;
  double alpha2 = 0.5;
  double split_prob = 0.0;
};

struct DatasetSpec {
  std::string ratings_path;
  std::string items_path;
  std::string rounds_cache;
  int context_size = 25;
  double pca_fraction = 0.95;
  std::uint64_t seed = 1;
};

struct GridSpec {
  bool requested = false;
  std::vector<double> alpha;       // empty with requested: default ladder
  std::vector<double> alpha2;      // empty with requested: {a, a/2, 2a} per alpha
  std::vector<double> split_prob;  // empty with requested: {0.1, 0.2, 0.3}
};

struct ExperimentConfig {
  Mode mode = Mode::kSynthetic;
  Metric metric = Metric::kRegret;
  std::string policy = "club";
  EnvConfig env;
  DatasetSpec dataset;
  double alpha = 0.5;
  double alpha2 = 0.5;
  double split_prob = 0.2;
  double cold_start_fraction = 0.1;
  bool complete_graph = false;
  GridSpec grid;
  double train_fraction = 0.1;
  long horizon = 0;  // synthetic only; replay derives it from the rounds
  std::vector<std::uint64_t> seeds{1};
  std::string out_path;
};

// Per-seed result over the test phase. `cum` accumulates regret under the
// regret metric and payoff under the ctr metric; `ratio` divides it by the
// paired uniform-random run on the identical round stream.
struct SeedTrace {
  std::uint64_t seed = 0;
  std::vector<double> cum;
  std::vector<double> ratio;
  std::vector<double> clusters;
  double final_cum = 0.0;
  double final_ratio = 1.0;
  double mean_payoff = 0.0;
  double mean_payoff_ratio = 1.0;
};

struct MetricTrace {
  Mode mode = Mode::kSynthetic;
  Metric metric = Metric::kRegret;
  std::string policy;
  bool tuned = false;
  GridPoint chosen;
  std::vector<std::pair<GridPoint, double>> tuning_scores;
  long train_rounds = 0;
  long test_rounds = 0;
  std::vector<SeedTrace> per_seed;
  SeedTrace averaged;  // pointwise arithmetic mean over the per-seed traces
};

namespace detail {

inline constexpr std::uint64_t kGraphSeedTag = 0x6772617068ULL;
inline constexpr std::uint64_t kPolicySeedTag = 0x706f6c696379ULL;
inline constexpr std::uint64_t kRanSeedTag = 0x72616e646f6dULL;
inline constexpr std::uint64_t kTuneStreamTag = 0x74756e65ULL;
inline constexpr std::uint64_t kTestStreamTag = 0x74657374ULL;

// FNV-1a over the raw bytes of whatever the round stream feeds the policy.
// Paired runs must agree on this, otherwise they saw different rounds.
struct Checksum {
  std::uint64_t h = 1469598103934665603ULL;

  void add_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  }
  void add_long(long v) { add_bytes(&v, sizeof v); }
  void add_int(int v) { add_bytes(&v, sizeof v); }
  void add_double(double v) { add_bytes(&v, sizeof v); }
};

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

struct PhaseResult {
  std::vector<RoundRecord> records;
  std::uint64_t checksum = 0;
};

// Plays `t_rounds` synthetic rounds against a fresh stream. The policy's own
// randomness lives in the policy; the stream only carries arrivals, contexts
// and payoff noise, so two policies replay identical worlds from one seed.
inline PhaseResult run_synthetic_phase(const SyntheticEnv& env, Policy& pol,
                                       long t_rounds, std::uint64_t stream_seed) {
  PhaseResult out;
  out.records.reserve(static_cast<std::size_t>(std::max<long>(t_rounds, 0)));
  Rng stream(stream_seed);
  detail::Checksum ck;
  for (long t = 1; t <= t_rounds; ++t) {
    const auto [user, ctx] = env.sample_round(t, stream);
    ck.add_long(t);
    ck.add_int(user);
    for (const Vec& x : ctx.vectors)
      ck.add_bytes(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
    const int k = pol.select(user, ctx, t);
    const double payoff = env.payoff(user, ctx.vectors[k], stream);
    const double regret = env.instant_regret(user, ctx, k);
    pol.feedback(user, ctx, k, payoff, t);
    out.records.push_back({t, user, k, payoff, regret, pol.cluster_count()});
  }
  out.checksum = ck.h;
  return out;
}

// Replays rounds [begin, end) with a phase-local 1-based clock.
inline PhaseResult run_replay_phase(const std::vector<ReplayRound>& rounds,
                                    Policy& pol, long begin, long end) {
  if (begin < 0 || end < begin || end > static_cast<long>(rounds.size()))
    throw std::invalid_argument("run_replay_phase: bad round range");
  PhaseResult out;
  out.records.reserve(static_cast<std::size_t>(end - begin));
  detail::Checksum ck;
  for (long idx = begin; idx < end; ++idx) {
    const ReplayRound& r = rounds[static_cast<std::size_t>(idx)];
    const long t = idx - begin + 1;
    ck.add_long(t);
    ck.add_int(r.user);
    for (int id : r.ctx.item_ids) ck.add_int(id);
    for (double a : r.payoffs) ck.add_double(a);
    const int k = pol.select(r.user, r.ctx, t);
    const double payoff = r.payoffs[static_cast<std::size_t>(k)];
    const double regret = replay_regret(r, k);
    pol.feedback(r.user, r.ctx, k, payoff, t);
    out.records.push_back({t, r.user, k, payoff, regret, pol.cluster_count()});
  }
  out.checksum = ck.h;
  return out;
}

namespace detail {

inline std::vector<GridPoint> build_grid(const ExperimentConfig& cfg) {
  const bool graph_policy = cfg.policy == "club" || cfg.policy == "gclub";
  const bool linear = graph_policy || cfg.policy == "linucb-one" ||
                      cfg.policy == "linucb-ind";
  const GridPoint base{cfg.alpha, cfg.alpha2,
                       cfg.policy == "gclub" ? cfg.split_prob : 0.0};
  if (!cfg.grid.requested || !linear) return {base};
  const std::vector<double> alphas =
      cfg.grid.alpha.empty()
          ? std::vector<double>{0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0}
          : cfg.grid.alpha;
  std::vector<GridPoint> points;
  for (double a : alphas) {
    std::vector<double> a2s;
    if (!graph_policy)
      a2s = {cfg.alpha2};
    else if (!cfg.grid.alpha2.empty())
      a2s = cfg.grid.alpha2;
    else
      a2s = {a, 0.5 * a, 2.0 * a};
    for (double a2 : a2s) {
      std::vector<double> sps;
      if (cfg.policy == "gclub")
        sps = cfg.grid.split_prob.empty() ? std::vector<double>{0.1, 0.2, 0.3}
                                          : cfg.grid.split_prob;
      else
        sps = {0.0};
      for (double sp : sps) points.push_back({a, a2, sp});
    }
  }
  return points;
}

inline std::unique_ptr<Policy> instantiate(const ExperimentConfig& cfg,
                                           const GridPoint& pt, int n_users,
                                           int dim, long phase_len,
                                           std::uint64_t seed,
                                           const std::string& name) {
  PolicyConfig pc;
  pc.dimension = dim;
  pc.alpha = pt.alpha;
  pc.alpha2 = pt.alpha2;
  pc.split_prob = name == "gclub" ? pt.split_prob : 0.0;
  pc.cold_start_fraction = cfg.cold_start_fraction;
  pc.complete_graph = cfg.complete_graph;
  pc.horizon = phase_len;
  pc.graph_seed = derive_seed(seed, kGraphSeedTag);
  pc.policy_seed = derive_seed(seed, name == "ran" ? kRanSeedTag : kPolicySeedTag);
  return make_policy(name, n_users, pc);
}

}  // namespace detail

inline std::vector<ReplayRound> load_or_build_rounds(const DatasetSpec& ds) {
  if (!ds.rounds_cache.empty() && std::filesystem::exists(ds.rounds_cache))
    return load_rounds(ds.rounds_cache);
  if (ds.ratings_path.empty())
    throw std::runtime_error(
        "replay mode needs dataset.rounds_cache or dataset.ratings");
  if (ds.items_path.empty())
    throw std::runtime_error("replay mode needs dataset.items to build features");
  InteractionLog log = load_movielens(ds.ratings_path);
  binarize_payoffs(log);
  const Mat raw = movielens_item_features(ds.items_path, log);
  const ItemFeatureTable feats = pca_standardize(raw, ds.pca_fraction);
  std::vector<ReplayRound> rounds =
      build_context_sets(log, feats, ds.context_size, ds.seed);
  if (!ds.rounds_cache.empty()) save_rounds(rounds, ds.rounds_cache);
  return rounds;
}

// Full experiment: optional grid tuning on the training prefix (first seed
// only), then per-seed test runs paired with a uniform-random run over the
// byte-identical round stream, then a seed-averaged trace.
inline MetricTrace run_experiment(const ExperimentConfig& cfg) {
  if (std::find(policy_names().begin(), policy_names().end(), cfg.policy) ==
      policy_names().end())
    throw std::invalid_argument("run_experiment: unknown policy '" + cfg.policy + "'");
  if (cfg.seeds.empty())
    throw std::invalid_argument("run_experiment: need at least one seed");
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
    throw std::invalid_argument("run_experiment: train_fraction must lie in (0, 1)");
  if (cfg.mode == Mode::kSynthetic && cfg.metric == Metric::kCtr)
    throw std::invalid_argument("run_experiment: ctr metric needs binary payoffs (replay mode)");

  std::optional<SyntheticEnv> env;
  std::vector<ReplayRound> rounds;
  long t_total = 0;
  int n_users = 0, dim = 0;
  if (cfg.mode == Mode::kSynthetic) {
    if (cfg.horizon < 1)
      throw std::invalid_argument("run_experiment: synthetic mode needs horizon >= 1");
    env = SyntheticEnv::make(cfg.env);
    t_total = cfg.horizon;
    n_users = env->users();
    dim = env->dim();
  } else {
    rounds = load_or_build_rounds(cfg.dataset);
    if (rounds.empty()) throw std::runtime_error("run_experiment: no replay rounds");
    t_total = static_cast<long>(rounds.size());
    for (const ReplayRound& r : rounds) n_users = std::max(n_users, r.user + 1);
    dim = static_cast<int>(rounds[0].ctx.vectors[0].size());
  }

  const long t_train = static_cast<long>(cfg.train_fraction * static_cast<double>(t_total));
  const long t_test = t_total - t_train;
  if (t_test < 1)
    throw std::invalid_argument("run_experiment: no test rounds left after tuning split");

  MetricTrace trace;
  trace.mode = cfg.mode;
  trace.metric = cfg.metric;
  trace.policy = cfg.policy;
  trace.train_rounds = t_train;
  trace.test_rounds = t_test;

  const std::vector<GridPoint> grid = detail::build_grid(cfg);
  GridPoint chosen = grid.front();
  if (grid.size() > 1) {
    if (t_train < 1)
      throw std::invalid_argument(
          "run_experiment: grid tuning needs a train_fraction that keeps rounds");
    double best = std::numeric_limits<double>::infinity();
    for (const GridPoint& pt : grid) {
      auto pol = detail::instantiate(cfg, pt, n_users, dim, t_train,
                                     cfg.seeds.front(), cfg.policy);
      const PhaseResult res =
          cfg.mode == Mode::kSynthetic
              ? run_synthetic_phase(
                    *env, *pol, t_train,
                    derive_seed(cfg.seeds.front(), detail::kTuneStreamTag))
              : run_replay_phase(rounds, *pol, 0, t_train);
      if (res.records.size() != static_cast<std::size_t>(t_train))
        throw std::logic_error("run_experiment: tuning consumed a wrong round count");
      double score = 0.0;
      for (const RoundRecord& rec : res.records)
        score += cfg.metric == Metric::kRegret ? rec.regret : -rec.payoff;
      trace.tuning_scores.emplace_back(pt, score);
      if (score < best) {
        best = score;
        chosen = pt;
      }
    }
    trace.tuned = true;
  }
  trace.chosen = chosen;

  for (const std::uint64_t seed : cfg.seeds) {
    if (cfg.mode == Mode::kSynthetic && t_train > 0 &&
        derive_seed(cfg.seeds.front(), detail::kTuneStreamTag) ==
            derive_seed(seed, detail::kTestStreamTag))
      throw std::logic_error("run_experiment: tuning and test streams collide");
    auto pol = detail::instantiate(cfg, chosen, n_users, dim, t_test, seed, cfg.policy);
    auto ran = detail::instantiate(cfg, chosen, n_users, dim, t_test, seed, "ran");
    PhaseResult rp, rr;
    if (cfg.mode == Mode::kSynthetic) {
      const std::uint64_t stream = derive_seed(seed, detail::kTestStreamTag);
      rp = run_synthetic_phase(*env, *pol, t_test, stream);
      rr = run_synthetic_phase(*env, *ran, t_test, stream);
    } else {
      rp = run_replay_phase(rounds, *pol, t_train, t_total);
      rr = run_replay_phase(rounds, *ran, t_train, t_total);
    }
    if (rp.checksum != rr.checksum)
      throw std::logic_error("run_experiment: paired runs saw different rounds");

    SeedTrace st;
    st.seed = seed;
    st.cum.reserve(rp.records.size());
    double cum_pol = 0.0, cum_ran = 0.0, payoff_sum = 0.0;
    for (std::size_t i = 0; i < rp.records.size(); ++i) {
      const double vp = cfg.metric == Metric::kRegret ? rp.records[i].regret
                                                      : rp.records[i].payoff;
      const double vr = cfg.metric == Metric::kRegret ? rr.records[i].regret
                                                      : rr.records[i].payoff;
      cum_pol += vp;
      cum_ran += vr;
      payoff_sum += rp.records[i].payoff;
      st.cum.push_back(cum_pol);
      st.ratio.push_back(cum_ran <= 0.0 ? 1.0 : cum_pol / cum_ran);
      st.clusters.push_back(static_cast<double>(rp.records[i].clusters));
    }
    st.final_cum = st.cum.back();
    st.final_ratio = st.ratio.back();
    double ran_payoff_sum = 0.0;
    for (const RoundRecord& rec : rr.records) ran_payoff_sum += rec.payoff;
    if (cfg.mode == Mode::kReplay) {
      st.mean_payoff = ctr(rp.records);
    } else {
      st.mean_payoff = payoff_sum / static_cast<double>(rp.records.size());
    }
    const double ran_mean = ran_payoff_sum / static_cast<double>(rr.records.size());
    st.mean_payoff_ratio = ran_mean <= 0.0 ? 1.0 : st.mean_payoff / ran_mean;
    trace.per_seed.push_back(std::move(st));
  }

  SeedTrace& avg = trace.averaged;
  avg.final_ratio = 0.0;
  avg.mean_payoff_ratio = 0.0;
  const auto n_seeds = static_cast<double>(trace.per_seed.size());
  avg.cum.assign(static_cast<std::size_t>(t_test), 0.0);
  avg.ratio.assign(static_cast<std::size_t>(t_test), 0.0);
  avg.clusters.assign(static_cast<std::size_t>(t_test), 0.0);
  for (const SeedTrace& st : trace.per_seed) {
    for (std::size_t i = 0; i < st.cum.size(); ++i) {
      avg.cum[i] += st.cum[i] / n_seeds;
      avg.ratio[i] += st.ratio[i] / n_seeds;
      avg.clusters[i] += st.clusters[i] / n_seeds;
    }
    avg.final_cum += st.final_cum / n_seeds;
    avg.final_ratio += st.final_ratio / n_seeds;
    avg.mean_payoff += st.mean_payoff / n_seeds;
    avg.mean_payoff_ratio += st.mean_payoff_ratio / n_seeds;
  }
  return trace;
}

// CSV with the seed-averaged trace, then a '#'-prefixed summary block.
// Output is byte-deterministic for a given trace.
inline void emit_csv(const MetricTrace& trace, std::ostream& os) {
  const char* cum_col =
      trace.metric == Metric::kRegret ? "cum_regret" : "cum_payoff";
  os << "t," << cum_col << ",ratio_vs_ran,m_t\n";
  const SeedTrace& avg = trace.averaged;
  for (std::size_t i = 0; i < avg.cum.size(); ++i)
    os << (i + 1) << ',' << detail::fmt_g(avg.cum[i]) << ','
       << detail::fmt_g(avg.ratio[i]) << ',' << detail::fmt_g(avg.clusters[i])
       << '\n';
  os << "# policy=" << trace.policy
     << " mode=" << (trace.mode == Mode::kSynthetic ? "synthetic" : "replay")
     << " metric=" << (trace.metric == Metric::kRegret ? "regret" : "ctr")
     << '\n';
  os << "# train_rounds=" << trace.train_rounds
     << " test_rounds=" << trace.test_rounds << " seeds=" << trace.per_seed.size()
     << '\n';
  os << "# tuned=" << (trace.tuned ? 1 : 0)
     << " alpha=" << detail::fmt_g(trace.chosen.alpha)
     << " alpha2=" << detail::fmt_g(trace.chosen.alpha2)
     << " split_prob=" << detail::fmt_g(trace.chosen.split_prob) << '\n';
  for (const auto& [pt, score] : trace.tuning_scores)
    os << "# grid alpha=" << detail::fmt_g(pt.alpha)
       << " alpha2=" << detail::fmt_g(pt.alpha2)
       << " split_prob=" << detail::fmt_g(pt.split_prob)
       << " score=" << detail::fmt_g(score) << '\n';
  for (const SeedTrace& st : trace.per_seed)
    os << "# seed=" << st.seed << " final_" << cum_col << '='
       << detail::fmt_g(st.final_cum)
       << " ratio_vs_ran=" << detail::fmt_g(st.final_ratio)
       << " mean_payoff=" << detail::fmt_g(st.mean_payoff)
       << " mean_payoff_ratio_vs_ran=" << detail::fmt_g(st.mean_payoff_ratio)
       << '\n';
  os << "# final_" << cum_col << '=' << detail::fmt_g(avg.final_cum)
     << " ratio_vs_ran=" << detail::fmt_g(avg.final_ratio)
     << " mean_payoff=" << detail::fmt_g(avg.mean_payoff)
     << " mean_payoff_ratio_vs_ran=" << detail::fmt_g(avg.mean_payoff_ratio)
     << '\n';
}

inline void emit_csv(const MetricTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  emit_csv(trace, out);
  if (!out) throw std::runtime_error("failed while writing csv: " + path);
}

inline ExperimentConfig experiment_from_config(const Config& c) {
  ExperimentConfig e;
  const std::string mode = c.get_string("experiment.mode", "synthetic");
  if (mode == "synthetic")
    e.mode = Mode::kSynthetic;
  else if (mode == "replay")
    e.mode = Mode::kReplay;
  else
    throw std::runtime_error("config: unknown mode '" + mode + "'");
  e.policy = c.get_string("experiment.policy", "club");
  const std::string metric = c.get_string(
      "experiment.metric", e.mode == Mode::kReplay ? "ctr" : "regret");
  if (metric == "regret")
    e.metric = Metric::kRegret;
  else if (metric == "ctr")
    e.metric = Metric::kCtr;
  else
    throw std::runtime_error("config: unknown metric '" + metric + "'");
  if (c.has("experiment.seeds"))
    e.seeds = c.get_u64_list("experiment.seeds");
  else
    e.seeds = {c.get_u64("experiment.seed", 1)};
  e.horizon = c.get_long("experiment.horizon", 0);
  e.train_fraction = c.get_double("experiment.train_fraction", 0.1);
  e.out_path = c.get_string("experiment.out", "");

  e.env.users = static_cast<int>(c.get_long("environment.users", 32));
  e.env.clusters = static_cast<int>(c.get_long("environment.clusters", 4));
  e.env.dim = static_cast<int>(c.get_long("environment.dimension", 10));
  e.env.gamma = c.get_double("environment.gamma", 0.5);
  e.env.sigma = c.get_double("environment.sigma", 0.1);
  e.env.context_size = static_cast<int>(c.get_long("environment.context_size", 10));
  const std::string arrivals = c.get_string("environment.arrivals", "uniform");
  if (arrivals == "uniform")
    e.env.arrivals = Arrivals::kUniform;
  else if (arrivals == "power")
    e.env.arrivals = Arrivals::kPowerLaw;
  else
    throw std::runtime_error("config: unknown arrivals '" + arrivals + "'");
  e.env.power_exponent = c.get_double("environment.power_exponent", 1.5);
  if (c.has("environment.cluster_sizes"))
    e.env.cluster_sizes = c.get_int_list("environment.cluster_sizes");
  e.env.seed = c.get_u64("environment.seed", 7);

  e.alpha = c.get_double("policy.alpha", 0.5);
  e.alpha2 = c.get_double("policy.alpha2", e.alpha);
  e.split_prob = c.get_double("policy.split_prob", 0.2);
  e.cold_start_fraction = c.get_double("policy.cold_start_fraction", 0.1);
  const std::string graph = c.get_string("policy.graph", "sparsified");
  if (graph == "sparsified")
    e.complete_graph = false;
  else if (graph == "complete")
    e.complete_graph = true;
  else
    throw std::runtime_error("config: unknown graph density '" + graph + "'");

  e.grid.requested = c.has("grid.alpha") || c.has("grid.alpha2") ||
                     c.has("grid.split_prob") || c.get_bool("grid.enabled", false);
  if (c.has("grid.alpha")) e.grid.alpha = c.get_double_list("grid.alpha");
  if (c.has("grid.alpha2")) e.grid.alpha2 = c.get_double_list("grid.alpha2");
  if (c.has("grid.split_prob"))
    e.grid.split_prob = c.get_double_list("grid.split_prob");

  e.dataset.ratings_path = c.get_string("dataset.ratings", "");
  e.dataset.items_path = c.get_string("dataset.items", "");
  e.dataset.rounds_cache = c.get_string("dataset.rounds_cache", "");
  e.dataset.context_size = static_cast<int>(c.get_long("dataset.context_size", 25));
  e.dataset.pca_fraction = c.get_double("dataset.pca_fraction", 0.95);
  e.dataset.seed = c.get_u64("dataset.seed", 1);
  return e;
}

}  // namespace clubs
