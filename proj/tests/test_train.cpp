#include <doctest.h>

#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/population.hpp"
#include "rfm/train.hpp"

#include <algorithm>

using namespace rfm;

namespace {

struct Fixture {
  std::shared_ptr<const Lexicon> lex = Lexicon::bundled();
  std::shared_ptr<const FeatureExtractor> fx = std::make_shared<const FeatureExtractor>(lex);
  std::vector<PreferencePair> pairs;
  FeatureNormalizer norm;
  std::vector<PairFeatures> feats;

  explicit Fixture(std::size_t n, std::uint64_t seed = 1) {
    pairs = generate_pairs(*lex, n, {seed, 1.0});
    norm = fit_normalizer(pairs, *fx);
    feats = compute_pair_features(pairs, *fx, norm);
  }

  // Drops pairs the user is indifferent about.
  std::vector<PreferenceRecord> label(const NamedUser& u) const {
    std::vector<PreferenceRecord> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (utility(feats[i].a, u.user) == utility(feats[i].b, u.user)) continue;
      out.push_back({u.id, pairs[i], label_preference(feats[i].a, feats[i].b, u.user)});
    }
    return out;
  }
};

EncoderConfig oracle(std::size_t d, std::vector<std::size_t> hidden = {}) {
  EncoderConfig c;
  c.mode = EncoderMode::OracleBaseFeatures;
  c.hidden_layers = std::move(hidden);
  c.feature_dim = d;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.validation_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train(std::vector<PreferenceRecord>{}, TrainConfig{}, oracle(4)), DataError);
}

TEST_CASE("separable single-rater data is fitted") {
  Fixture f(400);
  Rng urng(4);
  const NamedUser u{"solo", sample_user(0.5, urng)};
  const auto records = f.label(u);
  TrainConfig tc;
  tc.learning_rate = 2.0;
  tc.total_updates = 6000;
  tc.validation_fraction = 0.1;
  const auto result = train(records, tc, oracle(13), {f.fx, f.norm});
  CHECK(prediction_accuracy(result.model, records) >= 0.99);
}

TEST_CASE("baseline cannot fit exactly opposed raters") {
  Fixture f(300);
  Rng urng(6);
  const auto u = sample_user(0.5, urng);
  auto records = f.label({"plus", u});
  auto opposed = f.label({"minus", -u});
  records.insert(records.end(), opposed.begin(), opposed.end());
  TrainConfig tc;
  tc.learning_rate = 0.5;
  tc.total_updates = 1500;
  tc.baseline_mode = true;
  const auto result = train(records, tc, oracle(13), {f.fx, f.norm});
  CHECK(result.model.heads().rows() == 1);
  CHECK(prediction_accuracy(result.model, records) <= 0.55);

  SUBCASE("per-rater heads fit both") {
    tc.baseline_mode = false;
    const auto rfm = train(records, tc, oracle(13), {f.fx, f.norm});
    CHECK(rfm.model.heads().rows() == 2);
    CHECK(prediction_accuracy(rfm.model, records) >= 0.9);
  }
}

TEST_CASE("training is bit-reproducible") {
  Fixture f(200);
  const auto raters = name_users(sample_users({0.5, 2, 4}), "r");
  Rng rng(1);
  const auto records = label_with_raters(f.pairs, f.feats, raters, 2, rng);
  TrainConfig tc;
  tc.total_updates = 300;
  tc.eval_interval = 50;
  EncoderConfig enc;
  enc.hash_dim = 256;
  enc.hidden_layers = {12};
  enc.feature_dim = 6;
  const auto a = train(records, tc, enc, {f.fx, std::nullopt});
  const auto b = train(records, tc, enc, {f.fx, std::nullopt});
  CHECK(std::equal(a.model.encoder().parameters().begin(), a.model.encoder().parameters().end(),
                   b.model.encoder().parameters().begin()));
  CHECK(a.model.heads() == b.model.heads());
  CHECK(training_report_to_json(a.report) == training_report_to_json(b.report));
  SUBCASE("report structure") {
    CHECK(a.report.curve.front().update == 0);
    CHECK(a.report.curve.back().update == 300);
    CHECK(a.report.curve.size() == 7);
    CHECK(a.report.train_size + a.report.validation_size == records.size());
    CHECK(a.report.rater_count == 4);
    for (const auto& p : a.report.curve) {
      CHECK(p.validation_accuracy >= a.report.curve[0].validation_accuracy - 1.0);
      CHECK(p.validation_accuracy <= a.report.selected().validation_accuracy);
    }
  }
}

TEST_CASE("selected snapshot improves on initialisation") {
  Fixture f(300, 9);
  const auto raters = name_users(sample_users({0.5, 9, 6}), "r");
  Rng rng(9);
  const auto records = label_with_raters(f.pairs, f.feats, raters, 3, rng);
  TrainConfig tc;
  tc.learning_rate = 0.3;
  tc.total_updates = 1000;
  const auto r = train(records, tc, oracle(13, {16}), {f.fx, f.norm});
  CHECK(r.report.selected().validation_loss <= r.report.initial().validation_loss);
  CHECK(r.report.selected().validation_accuracy >= r.report.initial().validation_accuracy);
}

TEST_CASE("planted heads reach perfect accuracy on tie-free labels") {
  Fixture f(300, 12);
  const auto users = name_users(sample_users({0.5, 12, 5}), "u");
  std::vector<std::string> ids;
  for (const auto& u : users) ids.push_back(u.id);
  RfmModel model(oracle(13), ids, false, f.norm, f.fx);
  model.encoder().set_identity();
  for (std::size_t r = 0; r < users.size(); ++r) {
    for (std::size_t k = 0; k < 13; ++k) model.heads()(r, k) = users[r].user.omega[k];
  }
  std::vector<PreferenceRecord> records;
  for (const auto& u : users) {
    const auto part = f.label(u);
    records.insert(records.end(), part.begin(), part.end());
  }
  CHECK(prediction_accuracy(model, records) == 1.0);
}
