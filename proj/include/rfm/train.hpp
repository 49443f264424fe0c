#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfm/dataset.hpp"
#include "rfm/encoder.hpp"
#include "rfm/model.hpp"

namespace rfm {

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t total_updates = 6000;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool baseline_mode = false;  // one head shared by every rater
  double head_l2 = 0.0;        // penalty weight on ||W||^2
  double loss_floor = kDefaultLossFloor;
  std::size_t eval_interval = 200;  // updates between validation snapshots

  void validate() const;
};

struct CurvePoint {
  std::size_t update = 0;
  double train_loss = 0.0;  // mean mini-batch loss since the previous point (initial loss at update 0)
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainingReport {
  std::vector<CurvePoint> curve;
  std::size_t selected_point = 0;  // index into curve
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t rater_count = 0;

  const CurvePoint& selected() const { return curve.at(selected_point); }
  const CurvePoint& initial() const { return curve.front(); }
};

struct TrainResult {
  RfmModel model;
  TrainingReport report;
};

// What the model needs besides its parameters: the feature extractor and, in
// oracle mode, the fitted normalizer.
struct FeatureContext {
  std::shared_ptr<const FeatureExtractor> extractor;
  std::optional<FeatureNormalizer> normalizer;
};

TrainResult train(std::span<const PreferenceRecord> records, const TrainConfig& config, const EncoderConfig& encoder,
                  const FeatureContext& features = {});

// Fraction of records whose predicted label (1 iff logit > 0) matches.
double prediction_accuracy(const RfmModel& model, std::span<const PreparedRecord> records);
double prediction_accuracy(const RfmModel& model, std::span<const PreferenceRecord> records);

std::string training_report_to_json(const TrainingReport& report);
void save_training_report(const std::filesystem::path& path, const TrainingReport& report);

}  // namespace rfm
