#include <doctest.h>

#include <algorithm>

#include <json.hpp>

#include "rfm/corpus.hpp"
#include "rfm/error.hpp"
#include "rfm/eval.hpp"

using namespace rfm;

namespace {

struct World {
  std::shared_ptr<const Lexicon> lex = Lexicon::bundled();
  std::shared_ptr<const FeatureExtractor> fx = std::make_shared<const FeatureExtractor>(lex);
  std::vector<PreferencePair> pairs;
  FeatureNormalizer norm;
  std::vector<PairFeatures> truth;
  std::vector<NamedUser> users;

  World(std::size_t n, std::size_t u, std::uint64_t seed) {
    pairs = generate_pairs(*lex, n, {seed, 1.0});
    norm = fit_normalizer(pairs, *fx);
    truth = compute_pair_features(pairs, *fx, norm);
    users = name_users(sample_users({0.5, seed, u}), "u");
  }

  RfmModel identity_model(std::vector<std::string> raters, bool shared = false) const {
    EncoderConfig c;
    c.mode = EncoderMode::OracleBaseFeatures;
    c.hidden_layers = {};
    c.feature_dim = kNumBaseFeatures;
    RfmModel m(c, std::move(raters), shared, norm, fx);
    m.encoder().set_identity();
    return m;
  }

  Eigen::VectorXd omega(const NamedUser& u) const {
    Eigen::VectorXd w(kNumBaseFeatures);
    for (std::size_t k = 0; k < kNumBaseFeatures; ++k) w[k] = u.user.omega[k];
    return w;
  }
};

}  // namespace

TEST_CASE("true heads score perfectly, negated heads score zero") {
  World w(200, 5, 3);
  const auto model = w.identity_model({"unused"});
  std::vector<AdaptedHead> heads, flipped;
  for (const auto& u : w.users) {
    heads.push_back({u.id, w.omega(u), 0, 0, true});
    flipped.push_back({u.id, -w.omega(u), 0, 0, true});
  }
  EvalOptions opts{10, 0.99, 4};
  const auto good = inter_user_accuracy(model, heads, w.users, w.pairs, w.truth, opts);
  CHECK(good.mean == 1.0);
  CHECK(good.ci.lo == 1.0);
  CHECK(good.per_pass.size() == 10);
  CHECK(good.scored + good.skipped_ties == 10 * w.pairs.size());
  const auto bad = inter_user_accuracy(model, flipped, w.users, w.pairs, w.truth, opts);
  CHECK(bad.mean == 0.0);
  CHECK(bad.skipped_ties == good.skipped_ties);

  std::size_t per_user_total = 0;
  for (const auto& u : good.per_user) per_user_total += u.total;
  CHECK(per_user_total == good.scored);

  SUBCASE("missing head") {
    heads.pop_back();
    CHECK_THROWS_AS(inter_user_accuracy(model, heads, w.users, w.pairs, w.truth, opts), DataError);
  }
}

TEST_CASE("intra-user accuracy uses model rows; shared head serves every user") {
  World w(150, 4, 5);
  std::vector<std::string> ids;
  for (const auto& u : w.users) ids.push_back(u.id);
  auto model = w.identity_model(ids);
  for (std::size_t r = 0; r < w.users.size(); ++r) model.heads().row(r) = w.omega(w.users[r]).transpose();
  const auto rep = intra_user_accuracy(model, w.users, w.pairs, w.truth, {5, 0.95, 1});
  CHECK(rep.mean == 1.0);

  auto shared = w.identity_model({}, true);
  shared.heads().row(0) = w.omega(w.users[0]).transpose();
  const auto base = intra_user_accuracy(shared, w.users, w.pairs, w.truth, {5, 0.95, 1});
  CHECK(base.mean < 1.0);
  CHECK(base.per_user[0].accuracy() == 1.0);
}

TEST_CASE("pass protocol is seeded") {
  World w(100, 6, 7);
  const auto model = w.identity_model({"x"});
  const auto deltas = pair_deltas(model, w.pairs);
  std::vector<Eigen::VectorXd> heads(w.users.size(), Eigen::VectorXd::Ones(kNumBaseFeatures));
  const auto a = score_heads(deltas, heads, w.users, w.truth, {8, 0.99, 11});
  const auto b = score_heads(deltas, heads, w.users, w.truth, {8, 0.99, 11});
  const auto c = score_heads(deltas, heads, w.users, w.truth, {8, 0.99, 12});
  CHECK(a.per_pass == b.per_pass);
  CHECK(a.per_pass != c.per_pass);
  CHECK(a.ci.mid() == doctest::Approx(a.mean));
  CHECK(a.ci.lo <= a.mean);
  const auto single = score_heads(deltas, heads, w.users, w.truth, {1, 0.99, 11});
  CHECK(single.ci.lo == single.ci.hi);
  CHECK_THROWS_AS(score_heads(deltas, heads, w.users, w.truth, {0, 0.99, 11}), ConfigError);
  heads.pop_back();
  CHECK_THROWS_AS(score_heads(deltas, heads, w.users, w.truth, {2, 0.99, 11}), DataError);

  const auto j = nlohmann::json::parse(accuracy_report_to_json(a));
  CHECK(j.at("mean").get<double>() == a.mean);
  CHECK(j.at("per_pass").size() == 8);
}

TEST_CASE("best-of-n outcomes") {
  // One set of four candidates, one user. True utilities 1, 4, 2, 3.
  const std::vector<double> u{1, 4, 2, 3};
  const CandidateScorer truth = [&](std::size_t, std::size_t, std::size_t c) { return u[c]; };
  const CandidateScorer perfect = truth;
  const CandidateScorer reversed = [&](std::size_t, std::size_t, std::size_t c) { return -u[c]; };
  const CandidateScorer flat = [](std::size_t, std::size_t, std::size_t) { return 0.0; };
  const std::vector<std::size_t> sizes{4};
  const std::vector<std::size_t> grid{1, 2, 3, 4, 8};

  const auto r = best_of_n_compare(perfect, reversed, truth, sizes, 1, grid, 0);
  REQUIRE(r.points.size() == 5);
  CHECK(r.truncated == 1);
  CHECK(r.points[0].draws == 1);   // n = 1: both take candidate 0
  CHECK(r.points[1].wins_a == 1);  // 1 vs 0
  CHECK(r.points[2].wins_a == 1);
  CHECK(r.points[4].wins_a == 1);  // n clipped to 4
  CHECK(r.points[1].relative() == 1.0);

  // Flat scorer always keeps the first candidate.
  const auto f = best_of_n_compare(flat, perfect, truth, sizes, 1, grid, 0);
  CHECK(f.points[0].draws == 1);
  CHECK(f.points[1].wins_b == 1);
  CHECK(f.points[1].relative() == -1.0);

  // Different candidates with equal utility count as draws.
  const std::vector<double> tied{2, 2};
  const CandidateScorer tied_truth = [&](std::size_t, std::size_t, std::size_t c) { return tied[c]; };
  const CandidateScorer pick_last = [](std::size_t, std::size_t, std::size_t c) { return double(c); };
  const std::vector<std::size_t> two{2};
  const std::vector<std::size_t> n2{2};
  CHECK(best_of_n_compare(flat, pick_last, tied_truth, two, 1, n2, 0).points[0].draws == 1);

  CHECK_THROWS_AS(best_of_n_compare(flat, flat, truth, sizes, 1, std::vector<std::size_t>{}, 0), ConfigError);
  CHECK_THROWS_AS(best_of_n_compare(flat, flat, truth, sizes, 0, grid, 0), DataError);
  CHECK(BestOfNPoint{}.relative() == 0.0);

  const auto j = nlohmann::json::parse(best_of_n_report_to_json(r));
  CHECK(j.at("points").size() == 5);
}

TEST_CASE("best-of-n draws users per context") {
  // User k prefers candidate k; scorer a knows the user, scorer b always picks 0.
  const CandidateScorer truth = [](std::size_t user, std::size_t, std::size_t c) { return user == c ? 1.0 : 0.0; };
  const CandidateScorer b = [](std::size_t, std::size_t, std::size_t c) { return c == 0 ? 1.0 : 0.0; };
  const std::vector<std::size_t> sizes(400, 3);
  const std::vector<std::size_t> grid{3};
  const auto r = best_of_n_compare(truth, b, truth, sizes, 3, grid, 9);
  const auto& p = r.points[0];
  CHECK(p.wins_b == 0);
  CHECK(p.total() == 400);
  // Users 1 and 2 give a win, user 0 a draw.
  CHECK(p.relative() == doctest::Approx(2.0 / 3.0).epsilon(0.1));
}

TEST_CASE("disagreement filter") {
  // Four labelers over six pairs.
  const std::vector<std::vector<int>> table{
      {1, 1, 1, 1, 0, 0}, {1, 1, 1, 0, 0, 1}, {1, 1, 0, 0, 1, 1}, {1, 0, 0, 0, 0, 0}};
  std::vector<Labeler> ls;
  for (std::size_t l = 0; l < 4; ++l) ls.push_back({"l" + std::to_string(l), [&, l](std::size_t i) { return table[l][i]; }});
  // Column tallies (ones): 4, 3, 2, 1, 1, 2.
  CHECK(disagreement_filter(ls, 6, 2) == std::vector<std::size_t>{2, 5});
  CHECK(disagreement_filter(ls, 6, 0) == std::vector<std::size_t>{1, 2, 3, 4, 5});
}

TEST_CASE("leave-one-out folds") {
  World w(240, 4, 21);
  std::vector<std::vector<int>> labels(4);
  std::vector<Labeler> ls;
  for (std::size_t l = 0; l < 4; ++l) {
    for (const auto& t : w.truth) labels[l].push_back(label_preference(t.a, t.b, w.users[l].user));
  }
  for (std::size_t l = 0; l < 4; ++l) ls.push_back({w.users[l].id, [&, l](std::size_t i) { return labels[l][i]; }});

  LooConfig cfg;
  cfg.adaptation_examples = 10;
  cfg.disagreement_threshold = 0;
  cfg.encoder.mode = EncoderMode::OracleBaseFeatures;
  cfg.encoder.hidden_layers = {};
  cfg.encoder.feature_dim = kNumBaseFeatures;
  cfg.train.learning_rate = 0.5;
  cfg.train.total_updates = 200;
  cfg.features = {w.fx, w.norm};
  const auto folds = leave_one_out(ls, w.pairs, cfg);
  REQUIRE(folds.size() == 4);
  for (const auto& f : folds) {
    CHECK(f.adaptation_pairs == 10);
    CHECK(f.test_pairs > 0);
    CHECK(f.rfm_accuracy >= 0.0);
    CHECK(f.rfm_accuracy <= 1.0);
    CHECK(f.baseline_accuracy <= 1.0);
  }

  SUBCASE("unanimous labelers empty the filter") {
    std::vector<Labeler> same(3, Labeler{"same", [](std::size_t) { return 1; }});
    CHECK_THROWS_AS(leave_one_out(same, w.pairs, cfg), DataError);
  }
}

TEST_CASE("best-of-n: true utility against its negation") {
  // Random enumerated utilities for 300 sets of 20 candidates, 4 users.
  Rng rng(15);
  std::vector<std::vector<std::vector<double>>> u(4, std::vector<std::vector<double>>(300, std::vector<double>(20)));
  for (auto& user : u)
    for (auto& set : user)
      for (auto& v : set) v = rng.normal();
  const CandidateScorer truth = [&](std::size_t h, std::size_t s, std::size_t c) { return u[h][s][c]; };
  const CandidateScorer negated = [&](std::size_t h, std::size_t s, std::size_t c) { return -u[h][s][c]; };
  const std::vector<std::size_t> sizes(300, 20);
  const std::vector<std::size_t> grid{1, 2, 5, 10, 20};
  const auto r = best_of_n_compare(truth, negated, truth, sizes, 4, grid, 2);
  double prev = -1.0;
  for (const auto& p : r.points) {
    CHECK(p.wins_a >= p.wins_b);
    CHECK(p.relative() >= prev);
    prev = p.relative();
  }
  CHECK(r.points.front().draws == 300);
  CHECK(r.points.back().wins_b == 0);
}

TEST_CASE("best-of-n: true utility dominates any fixed scorer") {
  // Enumerate every ranking of 4 candidates as the competing scorer.
  const std::vector<double> u{0.3, -1.2, 2.0, 0.7};
  const CandidateScorer truth = [&](std::size_t, std::size_t, std::size_t c) { return u[c]; };
  std::vector<int> perm{0, 1, 2, 3};
  const std::vector<std::size_t> sizes{4};
  const std::vector<std::size_t> grid{1, 2, 3, 4};
  do {
    const CandidateScorer other = [&](std::size_t, std::size_t, std::size_t c) { return double(perm[c]); };
    for (const auto& p : best_of_n_compare(truth, other, truth, sizes, 1, grid, 0).points) CHECK(p.wins_b == 0);
  } while (std::next_permutation(perm.begin(), perm.end()));
}
