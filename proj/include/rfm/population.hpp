#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rfm/dataset.hpp"
#include "rfm/random.hpp"
#include "rfm/text_features.hpp"

namespace rfm {

// A synthetic user's taste: +1 likes a base feature, -1 dislikes it.
struct UserVector {
  std::array<int, kNumBaseFeatures> omega{};

  UserVector operator-() const;
  bool operator==(const UserVector&) const = default;
};

struct NamedUser {
  std::string id;
  UserVector user;

  bool operator==(const NamedUser&) const = default;
};

struct PopulationSpec {
  double p = 0.5;  // probability that each feature is liked
  std::uint64_t seed = 0;
  std::size_t count = 1;

  void validate() const;
};

// Each entry independently +1 with probability p, else -1.
UserVector sample_user(double p, Rng& rng);
std::vector<UserVector> sample_users(const PopulationSpec& spec);

// <features, omega> accumulated in feature order.
double utility(const BaseFeatureVector& features, const UserVector& user);

// 1 iff <a, omega> > <b, omega>; ties give 0.
int label_preference(const BaseFeatureVector& features_a, const BaseFeatureVector& features_b, const UserVector& user);

// Normalised base features of both responses of a pair.
struct PairFeatures {
  BaseFeatureVector a{};
  BaseFeatureVector b{};
};

std::vector<PairFeatures> compute_pair_features(std::span<const PreferencePair> pairs,
                                                const FeatureExtractor& extractor,
                                                const FeatureNormalizer& normalizer);

// Mean over unordered user pairs of the fraction of pairs they label differently.
double pairwise_disagreement(std::span<const UserVector> users, std::span<const PairFeatures> features);
double pairwise_disagreement(std::span<const UserVector> users, std::span<const PreferencePair> pairs,
                             const FeatureExtractor& extractor, const FeatureNormalizer& normalizer);

struct PolicyGain {
  double agnostic_reward = 0.0;  // max(E zbar, 1 - E zbar): choose before seeing the user
  double aware_reward = 0.0;     // E max(zbar, 1 - zbar): choose after seeing the user
};

// zbar[i] is user i's probability of preferring the first response; weights
// is the population distribution and must sum to 1 within 1e-9.
PolicyGain oracle_policy_gain(std::span<const double> zbar, std::span<const double> weights);

// Builds a labelled training set: every pair is visited `visits` times, and on
// each visit a rater is drawn uniformly from `raters` to label it.
std::vector<PreferenceRecord> label_with_raters(std::span<const PreferencePair> pairs,
                                                std::span<const PairFeatures> features,
                                                std::span<const NamedUser> raters, std::size_t visits, Rng& rng);

// Labels every pair with a single user.
std::vector<PreferenceRecord> label_all(std::span<const PreferencePair> pairs, std::span<const PairFeatures> features,
                                        const NamedUser& user);

// Users as "r0", "r1", ... (prefix configurable).
std::vector<NamedUser> name_users(std::span<const UserVector> users, const std::string& prefix);

// Line-delimited {"id": ..., "omega": [13 entries of +1/-1]}.
void save_users(const std::filesystem::path& path, std::span<const NamedUser> users);
std::vector<NamedUser> load_users(const std::filesystem::path& path);

}  // namespace rfm
