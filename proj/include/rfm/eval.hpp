#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfm/adaptation.hpp"
#include "rfm/model.hpp"
#include "rfm/population.hpp"
#include "rfm/stats.hpp"
#include "rfm/train.hpp"

namespace rfm {

struct EvalOptions {
  std::size_t passes = 50;
  double level = 0.99;
  std::uint64_t seed = 0;
};

struct UserAccuracy {
  std::string id;
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

// Accuracy is micro-averaged over every scored (pass, pair). Pairs the sampled
// user is indifferent about (equal true utility) are skipped. The interval is
// a t-interval over per-pass accuracies (degenerate when passes == 1).
struct AccuracyReport {
  double mean = 0.0;
  Interval ci;
  double level = 0.99;
  std::vector<double> per_pass;
  std::vector<UserAccuracy> per_user;
  std::size_t passes = 0;
  std::uint64_t seed = 0;
  std::size_t scored = 0;
  std::size_t skipped_ties = 0;
};

// phi(x,y) - phi(x,y') for every pair.
std::vector<Eigen::VectorXd> pair_deltas(const RfmModel& model, std::span<const PreferencePair> pairs);

// Core pass protocol: each pass assigns every pair a uniformly drawn user and
// predicts 1 iff <delta, head> > 0. heads[i] belongs to users[i].
AccuracyReport score_heads(std::span<const Eigen::VectorXd> deltas, std::span<const Eigen::VectorXd> heads,
                           std::span<const NamedUser> users, std::span<const PairFeatures> truth,
                           const EvalOptions& options);

// Held-out users with adapted heads (matched by id).
AccuracyReport inter_user_accuracy(const RfmModel& model, std::span<const AdaptedHead> heads,
                                   std::span<const NamedUser> users, std::span<const PreferencePair> pairs,
                                   std::span<const PairFeatures> truth, const EvalOptions& options);

// Users scored with the model's own rows of W. For a shared-head model every
// user maps to the single head, which is how the rater-agnostic baseline is
// evaluated.
AccuracyReport intra_user_accuracy(const RfmModel& model, std::span<const NamedUser> users,
                                   std::span<const PreferencePair> pairs, std::span<const PairFeatures> truth,
                                   const EvalOptions& options);

// Score of candidate `candidate` of set `set` for user `user`.
using CandidateScorer = std::function<double(std::size_t user, std::size_t set, std::size_t candidate)>;

struct BestOfNPoint {
  std::size_t n = 0;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t draws = 0;

  std::size_t total() const { return wins_a + wins_b + draws; }
  // Win rate of a minus win rate of b.
  double relative() const;
};

struct BestOfNReport {
  std::vector<BestOfNPoint> points;
  std::size_t contexts = 0;
  std::size_t truncated = 0;  // sets with fewer candidates than the largest n
};

// Every context draws one user; for each n both scorers pick their argmax
// among the first n candidates (lowest index on ties) and the user's true
// utility decides the outcome.
BestOfNReport best_of_n_compare(const CandidateScorer& a, const CandidateScorer& b, const CandidateScorer& truth,
                                std::span<const std::size_t> set_sizes, std::size_t user_count,
                                std::span<const std::size_t> n_grid, std::uint64_t seed);

struct Labeler {
  std::string name;
  std::function<int(std::size_t pair_index)> label;
};

struct LooConfig {
  std::size_t adaptation_examples = 50;
  std::size_t disagreement_threshold = 2;
  double test_fraction = 0.3;
  EncoderConfig encoder;
  TrainConfig train;
  AdaptConfig adapt;
  FeatureContext features;
  bool baselines = true;
  std::uint64_t seed = 0;
};

struct LooFold {
  std::string held_out;
  std::size_t train_pairs = 0;
  std::size_t adaptation_pairs = 0;
  std::size_t test_pairs = 0;
  double rfm_accuracy = 0.0;
  double baseline_accuracy = 0.0;  // shared head, no adaptation
  double linear_accuracy = 0.0;    // head adapted on the shared-head model's features
};

// Indices of pairs that survive the filter. A pair is dropped when a strict
// majority exists and at most `threshold` labelers disagree with it; pairs
// without a strict majority are kept.
std::vector<std::size_t> disagreement_filter(std::span<const Labeler> labelers, std::size_t pair_count,
                                             std::size_t threshold);

std::vector<LooFold> leave_one_out(std::span<const Labeler> labelers, std::span<const PreferencePair> pairs,
                                   const LooConfig& config);

std::string accuracy_report_to_json(const AccuracyReport& report);
std::string best_of_n_report_to_json(const BestOfNReport& report);

}  // namespace rfm
