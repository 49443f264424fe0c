#include <doctest.h>

#include <cmath>

#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/model.hpp"
#include "rfm/population.hpp"
#include "rfm/random.hpp"
#include "test_util.hpp"

using namespace rfm;

namespace {

EncoderConfig small_hashed(std::size_t d = 8) {
  EncoderConfig c;
  c.mode = EncoderMode::HashedNgrams;
  c.hash_dim = 128;
  c.hidden_layers = {16, 16};
  c.feature_dim = d;
  c.seed = 11;
  return c;
}

std::vector<PreferenceRecord> sample_records(std::size_t n, std::uint64_t seed,
                                             const std::vector<std::string>& raters) {
  const auto lex = Lexicon::bundled();
  const auto pairs = generate_pairs(*lex, n, {seed, 1.0});
  Rng rng(seed);
  std::vector<PreferenceRecord> out;
  for (const auto& p : pairs) out.push_back({raters[rng.index(raters.size())], p, rng.bernoulli(0.5) ? 1 : 0});
  return out;
}

// Finite-difference check of loss_and_gradient on a random parameter subset.
double max_relative_error(RfmModel& model, std::span<const PreparedRecord> batch, std::size_t probes,
                          std::uint64_t seed) {
  ModelGradient g;
  loss_and_gradient(model, batch, g);
  auto theta = model.encoder().parameters();
  const std::size_t heads = static_cast<std::size_t>(model.heads().size());
  Rng rng(seed);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t t = 0; t < probes; ++t) {
    const std::size_t k = rng.index(theta.size() + heads);
    double* slot = k < theta.size() ? &theta[k] : model.heads().data() + (k - theta.size());
    const double analytic = k < theta.size() ? g.encoder[k] : g.heads.data()[k - theta.size()];
    const double saved = *slot;
    *slot = saved + h;
    const double up = training_loss(model, batch);
    *slot = saved - h;
    const double down = training_loss(model, batch);
    *slot = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("capped_log") {
  CHECK(capped_log(1.0) == 0.0);
  CHECK(capped_log(std::exp(-20.0)) == doctest::Approx(1.0));
  CHECK(capped_log(0.5) == doctest::Approx(0.034657359).epsilon(1e-7));
  CHECK(capped_log(0.0) == 1.0);
  CHECK(capped_log(-3.0) == 1.0);
  CHECK(capped_log(1e-300) == 1.0);
  CHECK_THROWS_AS(capped_log(1.5), DataError);
  CHECK_THROWS_AS(capped_log(0.5, 0.0), ConfigError);
  double prev = 1.0;
  for (double u = 1e-12; u <= 1.0; u *= 1.7) {
    const double v = capped_log(u);
    CHECK(v <= prev);
    CHECK(v >= 0.0);
    prev = v;
  }
  SUBCASE("log-sigmoid form agrees") {
    for (double s : {-30.0, -5.0, -0.3, 0.0, 0.7, 4.0, 50.0}) {
      CHECK(capped_log_sigmoid(s) == doctest::Approx(capped_log(sigmoid(s))).epsilon(1e-12));
    }
  }
}

TEST_CASE("encode") {
  const RfmModel model(small_hashed(), {"r1"});
  const auto a = encode(model, "ctx", "A response.");
  const auto b = encode(model, "ctx", "A response.");
  CHECK(a.size() == 8);
  CHECK(a == b);
  CHECK(a.allFinite());
}

TEST_CASE("oracle identity encoder reproduces normalised base features") {
  const auto lex = Lexicon::bundled();
  auto fx = std::make_shared<const FeatureExtractor>(lex);
  const auto pairs = generate_pairs(*lex, 60, {2, 1.0});
  const auto norm = fit_normalizer(pairs, *fx);
  for (std::size_t d : {8u, 13u, 16u}) {
    EncoderConfig c;
    c.mode = EncoderMode::OracleBaseFeatures;
    c.hidden_layers = {};
    c.feature_dim = d;
    RfmModel model(c, {"r"}, false, norm, fx);
    model.encoder().set_identity();
    for (const auto& p : pairs) {
      const auto expected = norm.apply(fx->extract_raw_features(p.context, p.response_a));
      const auto phi = encode(model, p.context, p.response_a);
      for (std::size_t k = 0; k < d; ++k) CHECK(phi[k] == (k < 13 ? expected[k] : 0.0));
    }
  }
  EncoderConfig c;
  c.mode = EncoderMode::OracleBaseFeatures;
  CHECK_THROWS_AS(RfmModel(c, {"r"}), ConfigError);
}

TEST_CASE("pairwise probability") {
  RfmModel model(small_hashed(), {"r1", "r2"});
  const PreferencePair p{"Why?", "Because it rains.", "No reason at all!"};
  const PreferencePair swapped{p.context, p.response_b, p.response_a};
  CHECK(pairwise_probability(model, "r1", p) + pairwise_probability(model, "r1", swapped) == 1.0);
  CHECK(pairwise_logit(model, "r2", p) == -pairwise_logit(model, "r2", swapped));
  CHECK(pairwise_probability(model, "r1", {"q", "same", "same"}) == 0.5);
  model.heads().row(0).setZero();
  CHECK(pairwise_probability(model, "r1", p) == 0.5);
  CHECK_THROWS_AS(pairwise_probability(model, "stranger", p), DataError);
  SUBCASE("antisymmetry on many pairs") {
    const auto lex = Lexicon::bundled();
    for (const auto& q : generate_pairs(*lex, 100, {8, 1.0})) {
      CHECK(pairwise_logit(model, "r2", q) == -pairwise_logit(model, "r2", {q.context, q.response_b, q.response_a}));
    }
  }
}

TEST_CASE("training loss") {
  RfmModel model(small_hashed(), {"r1"});
  const auto recs = sample_records(40, 3, {"r1"});
  const double l = training_loss(model, recs);
  CHECK(l >= 0.0);
  CHECK(l <= 1.0);
  SUBCASE("c = 0.5 everywhere") {
    model.heads().setZero();
    CHECK(training_loss(model, recs) == doctest::Approx(std::log(0.5) / -20.0));
  }
  SUBCASE("confident predictions") {
    PreferenceRecord r = recs[0];
    const auto prepared = prepare_records(model, std::vector<PreferenceRecord>{r});
    const double logit = pairwise_logit(model, prepared[0]);
    REQUIRE(logit != 0.0);
    model.heads() *= 1e6 / std::abs(logit);  // |logit| = 1e6
    r.label = logit > 0 ? 1 : 0;
    CHECK(training_loss(model, std::vector<PreferenceRecord>{r}) == doctest::Approx(0.0));
    r.label = 1 - r.label;
    CHECK(training_loss(model, std::vector<PreferenceRecord>{r}) == 1.0);
  }
  CHECK_THROWS_AS(training_loss(model, std::vector<PreferenceRecord>{}), DataError);
  std::vector<PreferenceRecord> unknown{recs[0]};
  unknown[0].rater_id = "ghost";
  CHECK_THROWS_AS(training_loss(model, unknown), DataError);
}

TEST_CASE("loss gradient matches central differences") {
  RfmModel model(small_hashed(), {"r1", "r2", "r3"});
  const auto recs = sample_records(24, 5, {"r1", "r2", "r3"});
  const auto prepared = prepare_records(model, recs);
  CHECK(max_relative_error(model, prepared, 300, 1) <= 1e-4);
}

TEST_CASE("gradient edge cases") {
  RfmModel model(small_hashed(), {"r1"});
  const auto recs = sample_records(10, 6, {"r1"});
  SUBCASE("saturated records contribute nothing") {
    auto prepared = prepare_records(model, recs);
    model.heads() *= 1e9;
    for (auto& r : prepared) r.label = pairwise_logit(model, r) > 0 ? 0 : 1;
    ModelGradient g;
    CHECK(loss_and_gradient(model, prepared, g) == 1.0);
    CHECK(g.heads.isZero());
    CHECK(std::all_of(g.encoder.begin(), g.encoder.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("duplicating a record does not change the gradient") {
    const std::vector<PreferenceRecord> one{recs[0]};
    const std::vector<PreferenceRecord> many(5, recs[0]);
    const auto g1 = loss_gradient(model, one);
    const auto g5 = loss_gradient(model, many);
    CHECK((g1.heads - g5.heads).cwiseAbs().maxCoeff() <= 1e-15);
    for (std::size_t k = 0; k < g1.encoder.size(); ++k) CHECK(g1.encoder[k] == doctest::Approx(g5.encoder[k]).epsilon(1e-12));
  }
}

TEST_CASE("shared head resolves every rater") {
  RfmModel model(small_hashed(), {}, true);
  CHECK(model.heads().rows() == 1);
  CHECK(model.head_row("anyone") == 0);
  CHECK(model.knows("anyone"));
}

TEST_CASE("model persistence") {
  test::TempDir dir;
  const auto lex = Lexicon::bundled();
  auto fx = std::make_shared<const FeatureExtractor>(lex);
  const auto pairs = generate_pairs(*lex, 40, {1, 1.0});
  const auto norm = fit_normalizer(pairs, *fx);
  EncoderConfig c;
  c.mode = EncoderMode::OracleBaseFeatures;
  c.hidden_layers = {6};
  c.feature_dim = 4;
  const RfmModel model(c, {"a", "b"}, false, norm, fx);
  save_model(dir / "m.json", model);
  const auto back = load_model(dir / "m.json", &norm);
  CHECK(back.raters() == model.raters());
  CHECK(back.heads() == model.heads());
  CHECK(std::equal(back.encoder().parameters().begin(), back.encoder().parameters().end(),
                   model.encoder().parameters().begin()));
  CHECK(encode(back, "x", "y z.") == encode(model, "x", "y z."));

  auto other = norm;
  other.median[0] += 0.01;
  CHECK_THROWS_AS(load_model(dir / "m.json", &other), DataError);
  SUBCASE("tampered normalizer") {
    auto text = test::read_file(dir / "m.json");
    const auto pos = text.find("\"fitted_on\":");
    REQUIRE(pos != std::string::npos);
    text.insert(pos + 12, "1");
    test::write_file(dir / "t.json", text);
    CHECK_THROWS_AS(load_model(dir / "t.json"), DataError);
  }
}
