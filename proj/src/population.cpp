#include "rfm/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {

UserVector UserVector::operator-() const {
  UserVector out;
  for (std::size_t i = 0; i < kNumBaseFeatures; ++i) out.omega[i] = -omega[i];
  return out;
}

void PopulationSpec::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p", "must lie in [0, 1]");
  if (count < 1) throw ConfigError("count", "must be at least 1");
}

UserVector sample_user(double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p", "must lie in [0, 1]");
  UserVector u;
  for (auto& w : u.omega) w = rng.uniform() < p ? 1 : -1;
  return u;
}

std::vector<UserVector> sample_users(const PopulationSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "users"));
  std::vector<UserVector> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(sample_user(spec.p, rng));
  return out;
}

double utility(const BaseFeatureVector& features, const UserVector& user) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumBaseFeatures; ++i) s += features[i] * user.omega[i];
  return s;
}

int label_preference(const BaseFeatureVector& a, const BaseFeatureVector& b, const UserVector& user) {
  return utility(a, user) > utility(b, user) ? 1 : 0;
}

std::vector<PairFeatures> compute_pair_features(std::span<const PreferencePair> pairs,
                                                const FeatureExtractor& extractor,
                                                const FeatureNormalizer& normalizer) {
  std::vector<PairFeatures> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({normalizer.apply(extractor.extract_raw_features(p.context, p.response_a)),
                   normalizer.apply(extractor.extract_raw_features(p.context, p.response_b))});
  }
  return out;
}

double pairwise_disagreement(std::span<const UserVector> users, std::span<const PairFeatures> features) {
  if (users.size() < 2) throw DataError("pairwise_disagreement needs at least two users");
  if (features.empty()) throw DataError("pairwise_disagreement needs at least one pair");
  std::vector<std::vector<int>> labels(users.size());
  for (std::size_t u = 0; u < users.size(); ++u) {
    labels[u].reserve(features.size());
    for (const auto& f : features) labels[u].push_back(label_preference(f.a, f.b, users[u]));
  }
  double total = 0.0;
  std::size_t n_pairs = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    for (std::size_t j = i + 1; j < users.size(); ++j) {
      std::size_t differ = 0;
      for (std::size_t k = 0; k < features.size(); ++k) differ += labels[i][k] != labels[j][k];
      total += static_cast<double>(differ) / static_cast<double>(features.size());
      ++n_pairs;
    }
  }
  return total / static_cast<double>(n_pairs);
}

double pairwise_disagreement(std::span<const UserVector> users, std::span<const PreferencePair> pairs,
                             const FeatureExtractor& extractor, const FeatureNormalizer& normalizer) {
  if (users.size() < 2) throw DataError("pairwise_disagreement needs at least two users");
  const auto features = compute_pair_features(pairs, extractor, normalizer);
  return pairwise_disagreement(users, features);
}

PolicyGain oracle_policy_gain(std::span<const double> zbar, std::span<const double> weights) {
  if (zbar.size() != weights.size() || zbar.empty()) {
    throw DataError("oracle_policy_gain: zbar and weights must be non-empty and of equal length");
  }
  double total_weight = 0.0, mean = 0.0, aware = 0.0;
  for (std::size_t i = 0; i < zbar.size(); ++i) {
    if (!(zbar[i] >= 0.0 && zbar[i] <= 1.0)) throw DataError("oracle_policy_gain: zbar entries must lie in [0, 1]");
    if (!(weights[i] >= 0.0)) throw DataError("oracle_policy_gain: weights must be non-negative");
    total_weight += weights[i];
    mean += weights[i] * zbar[i];
    aware += weights[i] * std::max(zbar[i], 1.0 - zbar[i]);
  }
  if (std::abs(total_weight - 1.0) > 1e-9) throw DataError("oracle_policy_gain: weights must sum to 1");
  return {std::max(mean, 1.0 - mean), aware};
}

std::vector<PreferenceRecord> label_with_raters(std::span<const PreferencePair> pairs,
                                                std::span<const PairFeatures> features,
                                                std::span<const NamedUser> raters, std::size_t visits, Rng& rng) {
  if (pairs.size() != features.size()) throw DataError("label_with_raters: features do not match pairs");
  if (raters.empty()) throw DataError("label_with_raters: no raters");
  std::vector<PreferenceRecord> out;
  out.reserve(pairs.size() * visits);
  for (std::size_t v = 0; v < visits; ++v) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& rater = raters[rng.index(raters.size())];
      out.push_back({rater.id, pairs[i], label_preference(features[i].a, features[i].b, rater.user)});
    }
  }
  return out;
}

std::vector<PreferenceRecord> label_all(std::span<const PreferencePair> pairs, std::span<const PairFeatures> features,
                                        const NamedUser& user) {
  if (pairs.size() != features.size()) throw DataError("label_all: features do not match pairs");
  std::vector<PreferenceRecord> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back({user.id, pairs[i], label_preference(features[i].a, features[i].b, user.user)});
  }
  return out;
}

std::vector<NamedUser> name_users(std::span<const UserVector> users, const std::string& prefix) {
  std::vector<NamedUser> out;
  out.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) out.push_back({prefix + std::to_string(i), users[i]});
  return out;
}

void save_users(const std::filesystem::path& path, std::span<const NamedUser> users) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& u : users) {
    nlohmann::json j;
    j["id"] = u.id;
    j["omega"] = u.user.omega;
    out << j.dump() << '\n';
  }
}

std::vector<NamedUser> load_users(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<NamedUser> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed user: ") + e.what(), n);
    }
    if (!j.is_object() || j.size() != 2 || !j.contains("id") || !j.contains("omega") || !j["id"].is_string() ||
        !j["omega"].is_array() || j["omega"].size() != kNumBaseFeatures) {
      throw DataError("user records need exactly {\"id\": string, \"omega\": [13 x +1/-1]}", n);
    }
    NamedUser u;
    u.id = j["id"].get<std::string>();
    if (u.id.empty()) throw DataError("user id is empty", n);
    for (std::size_t i = 0; i < kNumBaseFeatures; ++i) {
      const auto& v = j["omega"][i];
      if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != -1)) {
        throw DataError("omega entries must be +1 or -1", n);
      }
      u.user.omega[i] = v.get<int>();
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace rfm
