#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clubs/bandit.hpp"
#include "clubs/rng.hpp"

namespace clubs {

// One logged event with original (file) ids.
struct RawEvent {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  long long timestamp = 0;
};

// One logged event after dense re-mapping.
struct Interaction {
  int user = 0;
  int item = 0;
  double rating = 0.0;
  long long timestamp = 0;
};

// Interaction log with ids remapped to dense 0-based ranges (in order of
// first appearance in the raw input) and events stable-sorted by timestamp.
class InteractionLog {
 public:
  static InteractionLog from_events(const std::vector<RawEvent>& raw) {
    InteractionLog log;
    log.events_.reserve(raw.size());
    for (const RawEvent& e : raw) {
      Interaction ev;
      ev.user = log.dense_id(log.user_map_, log.user_originals_, e.user);
      ev.item = log.dense_id(log.item_map_, log.item_originals_, e.item);
      ev.rating = e.rating;
      ev.timestamp = e.timestamp;
      log.events_.push_back(ev);
    }
    std::stable_sort(log.events_.begin(), log.events_.end(),
                     [](const Interaction& a, const Interaction& b) {
                       return a.timestamp < b.timestamp;
                     });
    return log;
  }

  const std::vector<Interaction>& events() const { return events_; }
  int user_count() const { return static_cast<int>(user_originals_.size()); }
  int item_count() const { return static_cast<int>(item_originals_.size()); }

  // Dense id -> id as it appeared in the raw input.
  const std::vector<int>& user_originals() const { return user_originals_; }
  const std::vector<int>& item_originals() const { return item_originals_; }

  int dense_item(int original) const {
    const auto it = item_map_.find(original);
    return it == item_map_.end() ? -1 : it->second;
  }

  void set_rating(std::size_t idx, double rating) { events_.at(idx).rating = rating; }

 private:
  int dense_id(std::map<int, int>& m, std::vector<int>& originals, int original) {
    const auto [it, inserted] = m.emplace(original, static_cast<int>(originals.size()));
    if (inserted) originals.push_back(original);
    return it->second;
  }

  std::vector<Interaction> events_;
  std::map<int, int> user_map_, item_map_;
  std::vector<int> user_originals_, item_originals_;
};

// Whitespace-separated "user item rating timestamp" rows (MovieLens u.data).
inline InteractionLog load_movielens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ratings file: " + path);
  std::vector<RawEvent> raw;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    RawEvent e;
    if (!(ss >> e.user >> e.item >> e.rating >> e.timestamp))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'user item rating timestamp'");
    raw.push_back(e);
  }
  return InteractionLog::from_events(raw);
}

// Nonzero ratings become payoff 1, zero stays 0.
inline void binarize_payoffs(InteractionLog& log) {
  for (std::size_t i = 0; i < log.events().size(); ++i)
    log.set_rating(i, log.events()[i].rating != 0.0 ? 1.0 : 0.0);
}

// Item features after dimensionality reduction; rows align with dense item
// ids of the log the table was built against.
struct ItemFeatureTable {
  Mat features;  // item_count x dim

  int dim() const { return static_cast<int>(features.cols()); }
  int item_count() const { return static_cast<int>(features.rows()); }
  Vec row(int item) const {
    if (item < 0 || item >= item_count())
      throw std::invalid_argument("ItemFeatureTable: item out of range");
    return features.row(item).transpose();
  }
};

struct PcaModel {
  Vec eigenvalues;  // descending, clamped at zero
  Mat components;   // raw_dim x retained, orthonormal columns
  Vec mean;         // column means of the fit data
  int retained = 0;
};

// Principal components of row-major data, keeping the smallest count of
// directions whose eigenvalue mass reaches `fraction` of the total. Column
// signs are fixed so each component's first nonzero entry is positive.
inline PcaModel pca_fit(const Mat& raw, double fraction) {
  if (raw.rows() < 2)
    throw std::invalid_argument("pca_fit: need at least two rows");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("pca_fit: fraction must lie in (0, 1]");
  const auto n = raw.rows();
  PcaModel model;
  model.mean = raw.colwise().mean().transpose();
  const Mat centered = raw.rowwise() - model.mean.transpose();
  const Mat cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("pca_fit: eigendecomposition failed");
  const auto dims = raw.cols();
  Vec evals(dims);
  Mat evecs(dims, dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    evals[j] = std::max(0.0, es.eigenvalues()[dims - 1 - j]);
    evecs.col(j) = es.eigenvectors().col(dims - 1 - j);
  }
  const double total = evals.sum();
  if (total <= 0.0)
    throw std::runtime_error("pca_fit: data carries no variance");
  const double cutoff = 1e-12 * evals[0];
  int retained = 0;
  double cum = 0.0;
  while (retained < dims && cum < fraction * total - 1e-15) {
    if (evals[retained] <= cutoff) break;
    cum += evals[retained];
    ++retained;
  }
  retained = std::max(retained, 1);
  for (int j = 0; j < retained; ++j) {
    for (Eigen::Index r = 0; r < dims; ++r) {
      const double v = evecs(r, j);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0) evecs.col(j) = -evecs.col(j);
        break;
      }
    }
  }
  model.eigenvalues = evals;
  model.components = evecs.leftCols(retained);
  model.retained = retained;
  return model;
}

// PCA projection followed by per-column standardization to mean zero and
// unit (population) variance.
inline ItemFeatureTable pca_standardize(const Mat& raw, double fraction) {
  const PcaModel model = pca_fit(raw, fraction);
  const Mat centered = raw.rowwise() - model.mean.transpose();
  Mat proj = centered * model.components;
  const auto n = proj.rows();
  for (Eigen::Index j = 0; j < proj.cols(); ++j) {
    const double mean = proj.col(j).mean();
    proj.col(j).array() -= mean;
    const double var = proj.col(j).squaredNorm() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) proj.col(j) /= sd;
  }
  return ItemFeatureTable{std::move(proj)};
}

// Raw per-item features from a MovieLens u.item file: the 19 genre flags
// plus the release year. Items missing a release year get the mean of the
// available years. Rows follow the log's dense item ids; items in the log
// but absent from the file are an error.
inline Mat movielens_item_features(const std::string& items_path,
                                   const InteractionLog& log) {
  std::ifstream in(items_path);
  if (!in) throw std::runtime_error("cannot open items file: " + items_path);
  constexpr int kGenres = 19;
  const int items = log.item_count();
  Mat raw = Mat::Zero(items, kGenres + 1);
  std::vector<char> seen(items, 0), has_year(items, 0);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    while (true) {
      const auto bar = line.find('|', start);
      fields.push_back(line.substr(start, bar == std::string::npos
                                              ? std::string::npos
                                              : bar - start));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    if (fields.size() < static_cast<std::size_t>(kGenres) + 5)
      throw std::runtime_error(items_path + ":" + std::to_string(line_no) +
                               ": expected at least " +
                               std::to_string(kGenres + 5) + " fields");
    int original = 0;
    try {
      original = std::stoi(fields[0]);
    } catch (const std::exception&) {
      throw std::runtime_error(items_path + ":" + std::to_string(line_no) +
                               ": bad item id '" + fields[0] + "'");
    }
    const int dense = log.dense_item(original);
    if (dense < 0) continue;
    seen[dense] = 1;
    const std::string& date = fields[2];
    if (date.size() >= 4) {
      try {
        raw(dense, kGenres) = std::stod(date.substr(date.size() - 4));
        has_year[dense] = 1;
      } catch (const std::exception&) {
      }
    }
    const std::size_t genre_base = fields.size() - kGenres;
    for (int gflag = 0; gflag < kGenres; ++gflag) {
      const std::string& f = fields[genre_base + gflag];
      raw(dense, gflag) = (f.find('1') != std::string::npos) ? 1.0 : 0.0;
    }
  }
  for (int i = 0; i < items; ++i)
    if (!seen[i])
      throw std::runtime_error(items_path + ": no metadata for item id " +
                               std::to_string(log.item_originals()[i]));
  double year_sum = 0.0;
  long year_count = 0;
  for (int i = 0; i < items; ++i)
    if (has_year[i]) {
      year_sum += raw(i, kGenres);
      ++year_count;
    }
  const double mean_year = year_count > 0 ? year_sum / year_count : 0.0;
  for (int i = 0; i < items; ++i)
    if (!has_year[i]) raw(i, kGenres) = mean_year;
  return raw;
}

// One replayable round: the user, the candidate contexts (positive item plus
// sampled negatives) and the ground-truth payoff of every candidate.
struct ReplayRound {
  long t = 0;
  int user = 0;
  ContextSet ctx;
  std::vector<double> payoffs;
};

// Builds one round per positive event. Candidates are the positive item plus
// (c - 1) distinct items drawn uniformly from those already seen in the log
// at that timestamp; when fewer are available the round shrinks. The
// positive's position is randomized.
inline std::vector<ReplayRound> build_context_sets(const InteractionLog& log,
                                                   const ItemFeatureTable& feats,
                                                   int c, std::uint64_t seed) {
  if (c < 1) throw std::invalid_argument("build_context_sets: c must be >= 1");
  if (feats.item_count() != log.item_count())
    throw std::invalid_argument("build_context_sets: feature table does not match log");
  const auto& events = log.events();
  const int items = log.item_count();

  // First-appearance timestamps, then items ordered by when they entered.
  std::vector<long long> first_ts(items, 0);
  std::vector<char> seen(items, 0);
  for (const Interaction& e : events)
    if (!seen[e.item]) {
      seen[e.item] = 1;
      first_ts[e.item] = e.timestamp;
    }
  std::vector<int> entry_order(items);
  for (int i = 0; i < items; ++i) entry_order[i] = i;
  std::stable_sort(entry_order.begin(), entry_order.end(), [&](int a, int b) {
    return first_ts[a] < first_ts[b];
  });

  Rng rng(derive_seed(seed, 0x726f756e6473ULL));
  std::vector<ReplayRound> rounds;
  std::vector<char> taken(items, 0);
  std::size_t avail = 0;
  long t = 0;
  for (const Interaction& e : events) {
    while (avail < entry_order.size() &&
           first_ts[entry_order[avail]] <= e.timestamp)
      ++avail;
    if (e.rating != 1.0) continue;
    const int want = static_cast<int>(std::min<long>(c, static_cast<long>(avail)));
    std::vector<int> negatives;
    negatives.reserve(want - 1);
    if (want - 1 >= static_cast<int>(avail) - 1) {
      for (std::size_t p = 0; p < avail; ++p)
        if (entry_order[p] != e.item) negatives.push_back(entry_order[p]);
    } else {
      taken[e.item] = 1;
      while (static_cast<int>(negatives.size()) < want - 1) {
        const int cand = entry_order[rng.below(static_cast<long>(avail))];
        if (taken[cand]) continue;
        taken[cand] = 1;
        negatives.push_back(cand);
      }
      taken[e.item] = 0;
      for (int g : negatives) taken[g] = 0;
    }
    ReplayRound round;
    round.t = ++t;
    round.user = e.user;
    const int slot = static_cast<int>(rng.below(static_cast<long>(negatives.size()) + 1));
    round.ctx.round = round.t;
    int gi = 0;
    for (int k = 0; k <= static_cast<int>(negatives.size()); ++k) {
      const int item = (k == slot) ? e.item : negatives[gi++];
      round.ctx.item_ids.push_back(item);
      round.ctx.vectors.push_back(feats.row(item));
      round.payoffs.push_back(item == e.item ? 1.0 : 0.0);
    }
    rounds.push_back(std::move(round));
  }
  return rounds;
}

// Best achievable payoff in the round minus the payoff of the choice.
inline double replay_regret(const ReplayRound& round, int chosen) {
  if (chosen < 0 || chosen >= static_cast<int>(round.payoffs.size()))
    throw std::invalid_argument("replay_regret: chosen index out of range");
  const double best = *std::max_element(round.payoffs.begin(), round.payoffs.end());
  return best - round.payoffs[chosen];
}

// Click-through rate of a binary payoff sequence.
inline double ctr(std::span<const double> payoffs) {
  if (payoffs.empty()) throw std::invalid_argument("ctr: empty payoff sequence");
  double total = 0.0;
  for (double a : payoffs) {
    if (a != 0.0 && a != 1.0)
      throw std::invalid_argument("ctr: payoffs must be binary");
    total += a;
  }
  return total / static_cast<double>(payoffs.size());
}

inline constexpr const char* kRoundsFormat = "clubs-replay-rounds";
inline constexpr int kRoundsVersion = 1;

// Line-JSON serialization of prepared rounds: a tagged header line followed
// by one round per line. Doubles survive the round trip exactly.
inline void save_rounds(const std::vector<ReplayRound>& rounds,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write rounds file: " + path);
  nlohmann::json header{{"format", kRoundsFormat},
                        {"version", kRoundsVersion},
                        {"rounds", rounds.size()},
                        {"dim", rounds.empty() ? 0 : rounds[0].ctx.vectors[0].size()}};
  out << header.dump() << '\n';
  for (const ReplayRound& r : rounds) {
    nlohmann::json j;
    j["t"] = r.t;
    j["user"] = r.user;
    j["items"] = r.ctx.item_ids;
    j["payoffs"] = r.payoffs;
    auto& xs = j["x"] = nlohmann::json::array();
    for (const Vec& v : r.ctx.vectors) {
      std::vector<double> row(v.data(), v.data() + v.size());
      xs.push_back(row);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing rounds file: " + path);
}

inline std::vector<ReplayRound> load_rounds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rounds file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty rounds file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error(path + ": bad header: " + ex.what());
  }
  if (header.value("format", "") != kRoundsFormat)
    throw std::runtime_error(path + ": not a rounds file");
  if (header.value("version", -1) != kRoundsVersion)
    throw std::runtime_error(path + ": unsupported rounds version");
  std::vector<ReplayRound> rounds;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    ReplayRound r;
    r.t = j.at("t").get<long>();
    r.user = j.at("user").get<int>();
    r.ctx.round = r.t;
    r.ctx.item_ids = j.at("items").get<std::vector<int>>();
    r.payoffs = j.at("payoffs").get<std::vector<double>>();
    for (const auto& row : j.at("x")) {
      const auto vals = row.get<std::vector<double>>();
      r.ctx.vectors.emplace_back(Eigen::Map<const Vec>(
          vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    if (r.ctx.item_ids.size() != r.ctx.vectors.size() ||
        r.payoffs.size() != r.ctx.vectors.size() || r.ctx.vectors.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": inconsistent round record");
    rounds.push_back(std::move(r));
  }
  if (static_cast<std::size_t>(header.value("rounds", 0)) != rounds.size())
    throw std::runtime_error(path + ": round count does not match header");
  return rounds;
}

}  // namespace clubs
