#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/experiment.hpp"
#include "test_util.hpp"

using namespace rfm;

namespace {

ExperimentConfig small_config() {
  return parse_experiment_config(R"(
# tiny oracle run
corpus_size = 300
raters = 6
heldout_users = 5
visits = 2
encoder.mode = oracle
encoder.hidden_layers = none
encoder.feature_dim = 13
train.learning_rate = 0.5
train.total_updates = 300
train.eval_interval = 100
adaptation_examples = 20
eval.passes = 4
best_of_n.sets = 20
best_of_n.n_grid = 1,4
seed = 5
)");
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = small_config();
  CHECK(c.corpus_size == 300);
  CHECK(c.encoder.mode == EncoderMode::OracleBaseFeatures);
  CHECK(c.encoder.hidden_layers.empty());
  CHECK(c.n_grid == std::vector<std::size_t>{1, 4});
  CHECK(c.train.learning_rate == 0.5);
  CHECK_FALSE(c.heldout_p.has_value());

  const auto text = format_experiment_config(c);
  CHECK(format_experiment_config(parse_experiment_config(text)) == text);

  auto expect_key = [](const std::string& text, const std::string& key) {
    try {
      parse_experiment_config(text);
      FAIL("no error for " << text);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  expect_key("bogus = 1", "bogus");
  expect_key("p = 1.5", "p");
  expect_key("raters = many", "raters");
  expect_key("encoder.mode = quantum", "encoder.mode");
  expect_key("run_rfm = maybe", "run_rfm");
  expect_key("just text", "");
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/x.cfg"), Error);
}

TEST_CASE("end-to-end run writes artifacts and is reproducible") {
  test::TempDir dir;
  auto c = small_config();
  c.output_dir = dir.path() / "run";
  const auto r = run_experiment(c);
  REQUIRE(r.rfm);
  REQUIRE(r.baseline);
  REQUIRE(r.linear);
  REQUIRE(r.intra);
  REQUIRE(r.best_of_n);
  CHECK(r.rfm->passes == 4);
  CHECK(r.rfm->mean > 0.5);
  CHECK(r.disagreement > 0.0);
  CHECK(r.best_of_n->contexts == 20);
  for (const char* f : {"config.txt", "normalizer.json", "model_rfm.json", "model_baseline.json", "heads_rfm.jsonl",
                        "summary.txt", "best_of_n.json"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(c.output_dir / f));
  }
  const auto model = load_model(c.output_dir / "model_rfm.json");
  CHECK(model.heads().rows() == 6);
  CHECK(load_heads(c.output_dir / "heads_rfm.jsonl").size() == 5);

  c.output_dir.clear();
  const auto again = run_experiment(c);
  CHECK(again.rfm->per_pass == r.rfm->per_pass);
  CHECK(again.best_of_n->points[1].wins_a == r.best_of_n->points[1].wins_a);
  CHECK(format_summary(again) == format_summary(r));
}

TEST_CASE("validation") {
  auto c = small_config();
  c.run_rfm = false;
  c.run_baselines = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.adaptation_examples = 100000;
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
  c = small_config();
  c.corpus_path = "/nonexistent/pairs.jsonl";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
