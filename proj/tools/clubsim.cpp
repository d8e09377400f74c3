// clubsim: simulator for graph-clustered linear bandits and baselines.
//
// Subcommands:
//   run                experiment from a config file, CSV out
//   bench-connectivity fuzz the decremental connectivity structure vs BFS
//   make-env           construct a synthetic environment and print diagnostics
//   ingest             build and cache replay rounds from a ratings log

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clubs/harness.hpp"

namespace {

struct RunArgs {
  std::string config_path;
  std::string policy;
  std::string seeds;
  std::string out;
  long horizon = -1;
  double train_fraction = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_run(const RunArgs& args) {
  clubs::Config file_cfg = clubs::Config::parse_file(args.config_path);
  if (!args.policy.empty()) file_cfg.set("experiment.policy", args.policy);
  if (!args.seeds.empty()) file_cfg.set("experiment.seeds", args.seeds);
  if (args.seed_set)
    file_cfg.set("experiment.seeds", std::to_string(args.seed));
  if (!args.out.empty()) file_cfg.set("experiment.out", args.out);
  if (args.horizon >= 0)
    file_cfg.set("experiment.horizon", std::to_string(args.horizon));
  if (args.train_fraction >= 0.0) {
    std::ostringstream ss;
    ss << args.train_fraction;
    file_cfg.set("experiment.train_fraction", ss.str());
  }
  clubs::ExperimentConfig cfg = clubs::experiment_from_config(file_cfg);
  // Relative output paths land under CLUBSIM_OUT_DIR when it is set.
  if (const char* dir = std::getenv("CLUBSIM_OUT_DIR");
      dir != nullptr && *dir != '\0' && !cfg.out_path.empty() &&
      !std::filesystem::path(cfg.out_path).is_absolute())
    cfg.out_path = (std::filesystem::path(dir) / cfg.out_path).string();
  if (!cfg.out_path.empty()) {
    const std::filesystem::path parent =
        std::filesystem::path(cfg.out_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  const clubs::MetricTrace trace = clubs::run_experiment(cfg);
  if (cfg.out_path.empty()) {
    clubs::emit_csv(trace, std::cout);
  } else {
    clubs::emit_csv(trace, cfg.out_path);
    const char* cum_col =
        trace.metric == clubs::Metric::kRegret ? "cum_regret" : "cum_payoff";
    std::cout << "wrote " << cfg.out_path << " policy=" << trace.policy
              << " final_" << cum_col << '='
              << clubs::detail::fmt_g(trace.averaged.final_cum)
              << " ratio_vs_ran="
              << clubs::detail::fmt_g(trace.averaged.final_ratio) << '\n';
  }
  return 0;
}

struct BenchArgs {
  int nodes = 256;
  long ops = 10000;
  std::uint64_t seed = 1;
};

// Interleaves random edge deletions with connectivity queries and checks
// every query against a BFS over a mirrored adjacency list.
int cmd_bench_connectivity(const BenchArgs& args) {
  clubs::UserGraph g = clubs::UserGraph::sparsified(args.nodes, args.seed);
  std::vector<std::vector<char>> oracle(args.nodes,
                                        std::vector<char>(args.nodes, 0));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < args.nodes; ++i)
    for (int j : g.neighbors(i))
      if (j > i) {
        oracle[i][j] = oracle[j][i] = 1;
        edges.emplace_back(i, j);
      }
  const auto bfs_connected = [&](int a, int b) {
    std::vector<char> seen(args.nodes, 0);
    std::vector<int> queue{a};
    seen[a] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int u = queue[head];
      if (u == b) return true;
      for (int v = 0; v < args.nodes; ++v)
        if (oracle[u][v] && !seen[v]) {
          seen[v] = 1;
          queue.push_back(v);
        }
    }
    return false;
  };

  clubs::Rng rng(clubs::derive_seed(args.seed, 0x62656e6368ULL));
  long deletions = 0, queries = 0, mismatches = 0;
  double structure_seconds = 0.0;
  for (long op = 0; op < args.ops; ++op) {
    if (!edges.empty() && rng.bernoulli(0.5)) {
      const auto idx = static_cast<std::size_t>(
          rng.below(static_cast<long>(edges.size())));
      const auto [a, b] = edges[idx];
      edges[idx] = edges.back();
      edges.pop_back();
      const auto start = std::chrono::steady_clock::now();
      g.delete_edge(a, b);
      structure_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      oracle[a][b] = oracle[b][a] = 0;
      ++deletions;
    } else {
      const int a = static_cast<int>(rng.below(args.nodes));
      const int b = static_cast<int>(rng.below(args.nodes));
      const auto start = std::chrono::steady_clock::now();
      const bool got = g.is_connected(a, b);
      structure_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      if (got != bfs_connected(a, b)) ++mismatches;
      ++queries;
    }
  }
  std::cout << "nodes=" << args.nodes << " deletions=" << deletions
            << " queries=" << queries << " mismatches=" << mismatches
            << " clusters=" << g.cluster_count()
            << " structure_seconds=" << clubs::detail::fmt_g(structure_seconds)
            << '\n';
  if (mismatches > 0) {
    std::cerr << "error: connectivity structure disagrees with BFS oracle\n";
    return 1;
  }
  return 0;
}

struct MakeEnvArgs {
  int users = 64;
  int clusters = 4;
  int dim = 10;
  double gamma = 0.5;
  double sigma = 0.1;
  int context_size = 10;
  std::string arrivals = "uniform";
  double power_exponent = 1.5;
  std::uint64_t seed = 7;
  long samples = 20000;
};

int cmd_make_env(const MakeEnvArgs& args) {
  clubs::EnvConfig cfg;
  cfg.users = args.users;
  cfg.clusters = args.clusters;
  cfg.dim = args.dim;
  cfg.gamma = args.gamma;
  cfg.sigma = args.sigma;
  cfg.context_size = args.context_size;
  if (args.arrivals == "uniform")
    cfg.arrivals = clubs::Arrivals::kUniform;
  else if (args.arrivals == "power")
    cfg.arrivals = clubs::Arrivals::kPowerLaw;
  else
    throw std::runtime_error("unknown arrivals '" + args.arrivals + "'");
  cfg.power_exponent = args.power_exponent;
  cfg.seed = args.seed;
  const clubs::SyntheticEnv env = clubs::SyntheticEnv::make(cfg);
  double min_sep = 2.0;
  for (int a = 0; a < env.clusters(); ++a)
    for (int b = a + 1; b < env.clusters(); ++b)
      min_sep = std::min(min_sep,
                         (env.parameter(a) - env.parameter(b)).norm());
  clubs::Rng rng(clubs::derive_seed(args.seed, 0x64696167ULL));
  const clubs::EnvDiagnostics diag = clubs::diagnose(env, args.samples, rng);
  std::cout << "users=" << env.users() << " clusters=" << env.clusters()
            << " dim=" << env.dim() << '\n';
  if (env.clusters() > 1)
    std::cout << "min_parameter_separation=" << clubs::detail::fmt_g(min_sep)
              << " (required >= " << clubs::detail::fmt_g(args.gamma) << ")\n";
  std::cout << "context_second_moment_min_eigenvalue="
            << clubs::detail::fmt_g(diag.min_eigenvalue)
            << " (1/dim = " << clubs::detail::fmt_g(1.0 / env.dim()) << ")\n";
  std::cout << "cluster_sizes=";
  for (std::size_t j = 0; j < diag.cluster_sizes.size(); ++j)
    std::cout << (j ? "," : "") << diag.cluster_sizes[j];
  std::cout << '\n';
  return 0;
}

struct IngestArgs {
  std::string ratings;
  std::string items;
  std::string out;
  int context_size = 25;
  double pca_fraction = 0.95;
  std::uint64_t seed = 1;
};

int cmd_ingest(const IngestArgs& args) {
  clubs::InteractionLog log = clubs::load_movielens(args.ratings);
  clubs::binarize_payoffs(log);
  const clubs::Mat raw = clubs::movielens_item_features(args.items, log);
  const clubs::ItemFeatureTable feats =
      clubs::pca_standardize(raw, args.pca_fraction);
  const std::vector<clubs::ReplayRound> rounds =
      clubs::build_context_sets(log, feats, args.context_size, args.seed);
  clubs::save_rounds(rounds, args.out);
  std::cout << "events=" << log.events().size() << " users=" << log.user_count()
            << " items=" << log.item_count() << " feature_dim=" << feats.dim()
            << " rounds=" << rounds.size() << '\n'
            << "wrote " << args.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulator for graph-clustered linear bandits"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", run_args.config_path, "INI-style experiment config")
      ->required();
  run->add_option("--policy", run_args.policy,
                  "override experiment.policy (club, gclub, linucb-one, "
                  "linucb-ind, ucb-one, ucb-ind, ran)");
  run->add_option("--seeds", run_args.seeds, "override experiment.seeds (comma list)");
  CLI::Option* seed_opt =
      run->add_option("--seed", run_args.seed, "override with a single seed");
  run->add_option("--out", run_args.out, "override experiment.out (CSV path)");
  run->add_option("--horizon", run_args.horizon, "override experiment.horizon");
  run->add_option("--train-fraction", run_args.train_fraction,
                  "override experiment.train_fraction");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "bench-connectivity", "fuzz edge deletions against a BFS oracle");
  bench->add_option("--nodes", bench_args.nodes, "graph size")
      ->check(CLI::PositiveNumber);
  bench->add_option("--ops", bench_args.ops, "operation count")
      ->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_args.seed, "rng seed");

  MakeEnvArgs env_args;
  CLI::App* mkenv = app.add_subcommand(
      "make-env", "construct a synthetic environment and print diagnostics");
  mkenv->add_option("--users", env_args.users)->check(CLI::PositiveNumber);
  mkenv->add_option("--clusters", env_args.clusters)->check(CLI::PositiveNumber);
  mkenv->add_option("--dim", env_args.dim)->check(CLI::PositiveNumber);
  mkenv->add_option("--gamma", env_args.gamma, "min parameter separation");
  mkenv->add_option("--sigma", env_args.sigma, "payoff noise scale");
  mkenv->add_option("--context-size", env_args.context_size)
      ->check(CLI::PositiveNumber);
  mkenv->add_option("--arrivals", env_args.arrivals, "uniform or power");
  mkenv->add_option("--power-exponent", env_args.power_exponent);
  mkenv->add_option("--seed", env_args.seed);
  mkenv->add_option("--samples", env_args.samples, "diagnostic sample count")
      ->check(CLI::PositiveNumber);

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "build and cache replay rounds from a ratings log");
  ingest->add_option("--ratings", ingest_args.ratings, "u.data style TSV")
      ->required();
  ingest->add_option("--items", ingest_args.items, "u.item style metadata")
      ->required();
  ingest->add_option("--out", ingest_args.out, "rounds cache path")->required();
  ingest->add_option("--context-size", ingest_args.context_size)
      ->check(CLI::PositiveNumber);
  ingest->add_option("--pca-fraction", ingest_args.pca_fraction);
  ingest->add_option("--seed", ingest_args.seed);

  try {
    app.parse(argc, argv);
    run_args.seed_set = seed_opt->count() > 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (bench->parsed()) return cmd_bench_connectivity(bench_args);
    if (mkenv->parsed()) return cmd_make_env(env_args);
    if (ingest->parsed()) return cmd_ingest(ingest_args);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
