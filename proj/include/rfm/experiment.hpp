#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rfm/adaptation.hpp"
#include "rfm/encoder.hpp"
#include "rfm/eval.hpp"
#include "rfm/train.hpp"

namespace rfm {

struct ExperimentConfig {
  // Data. Without a corpus path a synthetic corpus of corpus_size pairs is generated.
  std::filesystem::path corpus_path;
  std::size_t corpus_size = 2000;
  double test_fraction = 0.2;

  // Population.
  std::size_t raters = 40;
  double p = 0.5;
  std::size_t heldout_users = 50;
  std::optional<double> heldout_p;  // held-out users drawn with a different homogeneity
  std::size_t visits = 3;

  EncoderConfig encoder;
  TrainConfig train;
  AdaptConfig adapt;
  std::size_t adaptation_examples = 30;  // n-hat

  EvalOptions eval;
  bool run_rfm = true;
  bool run_baselines = true;

  // Best-of-n (skipped when best_of_n_sets == 0).
  std::size_t best_of_n_sets = 0;
  std::vector<std::size_t> n_grid{1, 5, 10, 20, 40};
  double candidate_spread = 1.5;

  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

// "key = value" lines; '#' starts a comment. Unknown keys and malformed values
// raise ConfigError naming the key.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string format_experiment_config(const ExperimentConfig& config);

struct ExperimentResult {
  std::optional<AccuracyReport> rfm;       // adapted heads on held-out users
  std::optional<AccuracyReport> baseline;  // shared head, no adaptation
  std::optional<AccuracyReport> linear;    // adapted heads on baseline features
  std::optional<AccuracyReport> intra;     // training raters on test pairs
  std::optional<TrainingReport> rfm_training;
  std::optional<TrainingReport> baseline_training;
  std::optional<BestOfNReport> best_of_n;  // a = adapted RFM, b = baseline
  double disagreement = 0.0;               // pairwise disagreement among raters on test pairs
};

// simulate -> train -> adapt -> eval. Writes artifacts when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string format_summary(const ExperimentResult& result);

}  // namespace rfm
