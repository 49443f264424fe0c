#include "rfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/random.hpp"

namespace rfm {
namespace {

std::size_t argmax_prefix(const CandidateScorer& scorer, std::size_t user, std::size_t set, std::size_t n) {
  std::size_t best = 0;
  double best_score = scorer(user, set, 0);
  for (std::size_t c = 1; c < n; ++c) {
    const double s = scorer(user, set, c);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

double head_accuracy(std::span<const Eigen::VectorXd> deltas, const Eigen::VectorXd& w, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) correct += (deltas[i].dot(w) > 0.0 ? 1 : 0) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(deltas.size());
}

}  // namespace

std::vector<Eigen::VectorXd> pair_deltas(const RfmModel& model, std::span<const PreferencePair> pairs) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(encode(model, p.context, p.response_a) - encode(model, p.context, p.response_b));
  return out;
}

AccuracyReport score_heads(std::span<const Eigen::VectorXd> deltas, std::span<const Eigen::VectorXd> heads,
                           std::span<const NamedUser> users, std::span<const PairFeatures> truth,
                           const EvalOptions& options) {
  if (options.passes < 1) throw ConfigError("passes", "must be at least 1");
  if (users.empty()) throw DataError("no users to evaluate");
  if (heads.size() != users.size()) throw DataError("every user needs a head");
  if (deltas.size() != truth.size()) throw DataError("pairs and ground-truth features differ in length");
  if (deltas.empty()) throw DataError("no pairs to evaluate");

  AccuracyReport r;
  r.level = options.level;
  r.passes = options.passes;
  r.seed = options.seed;
  for (const auto& u : users) r.per_user.push_back({u.id, 0, 0});
  std::size_t correct_total = 0;
  for (std::size_t pass = 0; pass < options.passes; ++pass) {
    Rng rng(derive_seed(options.seed, pass));
    std::size_t correct = 0, scored = 0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const std::size_t u = rng.index(users.size());
      const auto& omega = users[u].user;
      if (utility(truth[i].a, omega) == utility(truth[i].b, omega)) {
        ++r.skipped_ties;
        continue;
      }
      const int label = label_preference(truth[i].a, truth[i].b, omega);
      const int predicted = deltas[i].dot(heads[u]) > 0.0 ? 1 : 0;
      const bool ok = predicted == label;
      correct += ok;
      ++scored;
      r.per_user[u].correct += ok;
      ++r.per_user[u].total;
    }
    r.per_pass.push_back(scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored));
    correct_total += correct;
    r.scored += scored;
  }
  if (r.scored == 0) throw DataError("every evaluated pair was a tie");
  r.mean = static_cast<double>(correct_total) / static_cast<double>(r.scored);
  if (r.per_pass.size() >= 2) {
    r.ci = confidence_interval(r.per_pass, options.level);
    // Micro and per-pass means can differ slightly; keep the interval around the reported mean.
    const double hw = r.ci.half_width();
    r.ci = {r.mean - hw, r.mean + hw};
  } else {
    r.ci = {r.mean, r.mean};
  }
  return r;
}

AccuracyReport inter_user_accuracy(const RfmModel& model, std::span<const AdaptedHead> heads,
                                   std::span<const NamedUser> users, std::span<const PreferencePair> pairs,
                                   std::span<const PairFeatures> truth, const EvalOptions& options) {
  std::unordered_map<std::string, const AdaptedHead*> by_id;
  for (const auto& h : heads) by_id[h.user_id] = &h;
  std::vector<Eigen::VectorXd> ws;
  for (const auto& u : users) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) throw DataError("no adapted head for user '" + u.id + "'");
    if (it->second->w.size() != static_cast<Eigen::Index>(model.feature_dim())) {
      throw DataError("head for '" + u.id + "' does not match the model feature dimension");
    }
    ws.push_back(it->second->w);
  }
  return score_heads(pair_deltas(model, pairs), ws, users, truth, options);
}

AccuracyReport intra_user_accuracy(const RfmModel& model, std::span<const NamedUser> users,
                                   std::span<const PreferencePair> pairs, std::span<const PairFeatures> truth,
                                   const EvalOptions& options) {
  std::vector<Eigen::VectorXd> ws;
  for (const auto& u : users) {
    ws.push_back(model.heads().row(static_cast<Eigen::Index>(model.head_row(u.id))).transpose());
  }
  return score_heads(pair_deltas(model, pairs), ws, users, truth, options);
}

double BestOfNPoint::relative() const {
  const std::size_t t = total();
  if (t == 0) return 0.0;
  return (static_cast<double>(wins_a) - static_cast<double>(wins_b)) / static_cast<double>(t);
}

BestOfNReport best_of_n_compare(const CandidateScorer& a, const CandidateScorer& b, const CandidateScorer& truth,
                                std::span<const std::size_t> set_sizes, std::size_t user_count,
                                std::span<const std::size_t> n_grid, std::uint64_t seed) {
  if (n_grid.empty()) throw ConfigError("n_grid", "must not be empty");
  if (user_count < 1) throw DataError("no users for best-of-n");
  if (set_sizes.empty()) throw DataError("no candidate sets");
  std::size_t n_max = 0;
  for (std::size_t n : n_grid) {
    if (n < 1) throw ConfigError("n_grid", "entries must be positive");
    n_max = std::max(n_max, n);
  }
  BestOfNReport r;
  r.contexts = set_sizes.size();
  for (std::size_t n : n_grid) r.points.push_back({n, 0, 0, 0});
  Rng rng(derive_seed(seed, "best-of-n-users"));
  for (std::size_t s = 0; s < set_sizes.size(); ++s) {
    if (set_sizes[s] == 0) throw DataError("empty candidate set at index " + std::to_string(s));
    if (set_sizes[s] < n_max) ++r.truncated;
    const std::size_t user = rng.index(user_count);
    for (auto& p : r.points) {
      const std::size_t n = std::min(p.n, set_sizes[s]);
      const std::size_t ca = argmax_prefix(a, user, s, n);
      const std::size_t cb = argmax_prefix(b, user, s, n);
      const double ua = truth(user, s, ca), ub = truth(user, s, cb);
      if (ca == cb || ua == ub) {
        ++p.draws;
      } else if (ua > ub) {
        ++p.wins_a;
      } else {
        ++p.wins_b;
      }
    }
  }
  return r;
}

std::vector<std::size_t> disagreement_filter(std::span<const Labeler> labelers, std::size_t pair_count,
                                             std::size_t threshold) {
  std::vector<std::size_t> kept;
  const std::size_t k = labelers.size();
  for (std::size_t i = 0; i < pair_count; ++i) {
    std::size_t ones = 0;
    for (const auto& l : labelers) ones += l.label(i) == 1;
    const std::size_t zeros = k - ones;
    if (ones != zeros && std::min(ones, zeros) <= threshold) continue;
    kept.push_back(i);
  }
  return kept;
}

std::vector<LooFold> leave_one_out(std::span<const Labeler> labelers, std::span<const PreferencePair> pairs,
                                   const LooConfig& config) {
  if (labelers.size() < 2) throw ConfigError("labelers", "leave-one-out needs at least two labelers");
  if (config.adaptation_examples < 1) throw ConfigError("adaptation_examples", "must be positive");
  const auto kept = disagreement_filter(labelers, pairs.size(), config.disagreement_threshold);
  if (kept.empty()) throw DataError("disagreement filter removed every example; folds would be empty");

  const auto [train_pos, test_pos] = split_indices(kept.size(), config.test_fraction, derive_seed(config.seed, "loo-split"));
  if (train_pos.size() < config.adaptation_examples) {
    throw DataError("only " + std::to_string(train_pos.size()) + " filtered training pairs, fewer than the " +
                    std::to_string(config.adaptation_examples) + " adaptation examples requested");
  }
  std::vector<LooFold> folds;
  for (std::size_t f = 0; f < labelers.size(); ++f) {
    const std::uint64_t fold_seed = derive_seed(derive_seed(config.seed, "loo-fold"), f);
    const auto& held = labelers[f];

    std::vector<PreferenceRecord> records;
    for (std::size_t pos : train_pos) {
      const std::size_t i = kept[pos];
      for (std::size_t l = 0; l < labelers.size(); ++l) {
        if (l == f) continue;
        records.push_back({labelers[l].name, pairs[i], labelers[l].label(i)});
      }
    }
    if (records.empty()) throw DataError("fold '" + held.name + "' has no training data");

    std::vector<std::size_t> adapt_pos(train_pos.begin(), train_pos.end());
    Rng rng(derive_seed(fold_seed, "adaptation-examples"));
    rng.shuffle(adapt_pos);
    adapt_pos.resize(config.adaptation_examples);
    std::vector<LabelledPair> adapt_data;
    for (std::size_t pos : adapt_pos) adapt_data.push_back({pairs[kept[pos]], held.label(kept[pos])});
    std::vector<PreferencePair> test_pairs;
    std::vector<int> test_labels;
    for (std::size_t pos : test_pos) {
      test_pairs.push_back(pairs[kept[pos]]);
      test_labels.push_back(held.label(kept[pos]));
    }

    LooFold fold;
    fold.held_out = held.name;
    fold.train_pairs = train_pos.size();
    fold.adaptation_pairs = adapt_data.size();
    fold.test_pairs = test_pairs.size();

    TrainConfig tc = config.train;
    tc.seed = derive_seed(fold_seed, "train");
    tc.baseline_mode = false;
    EncoderConfig ec = config.encoder;
    ec.seed = derive_seed(fold_seed, "encoder");
    const auto rfm = train(records, tc, ec, config.features);
    const auto head = adapt(build_adaptation_set(rfm.model, adapt_data), config.adapt);
    fold.rfm_accuracy = head_accuracy(pair_deltas(rfm.model, test_pairs), head.w, test_labels);

    if (config.baselines) {
      tc.baseline_mode = true;
      const auto base = train(records, tc, ec, config.features);
      const auto deltas = pair_deltas(base.model, test_pairs);
      fold.baseline_accuracy = head_accuracy(deltas, base.model.heads().row(0).transpose(), test_labels);
      const auto linear = adapt(build_adaptation_set(base.model, adapt_data), config.adapt);
      fold.linear_accuracy = head_accuracy(deltas, linear.w, test_labels);
    }
    folds.push_back(fold);
  }
  return folds;
}

std::string accuracy_report_to_json(const AccuracyReport& r) {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : r.per_user) {
    users.push_back({{"id", u.id}, {"correct", u.correct}, {"total", u.total}, {"accuracy", u.accuracy()}});
  }
  nlohmann::json j = {{"mean", r.mean},       {"ci", {r.ci.lo, r.ci.hi}},   {"level", r.level},
                      {"averaging", "micro"}, {"passes", r.passes},         {"seed", r.seed},
                      {"scored", r.scored},   {"skipped_ties", r.skipped_ties}, {"per_pass", r.per_pass},
                      {"per_user", users}};
  return j.dump(2);
}

std::string best_of_n_report_to_json(const BestOfNReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    points.push_back({{"n", p.n},
                      {"wins_a", p.wins_a},
                      {"wins_b", p.wins_b},
                      {"draws", p.draws},
                      {"relative", p.relative()}});
  }
  return nlohmann::json{{"contexts", r.contexts}, {"truncated", r.truncated}, {"points", points}}.dump(2);
}

}  // namespace rfm
