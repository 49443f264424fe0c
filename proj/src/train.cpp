#include "rfm/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/random.hpp"

namespace rfm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (total_updates < 1) throw ConfigError("total_updates", "must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction", "must lie strictly between 0 and 1");
  }
  if (!(head_l2 >= 0.0)) throw ConfigError("head_l2", "must be non-negative");
  if (!(loss_floor < 0.0)) throw ConfigError("loss_floor", "must be negative");
  if (eval_interval < 1) throw ConfigError("eval_interval", "must be positive");
}

double prediction_accuracy(const RfmModel& model, std::span<const PreparedRecord> records) {
  if (records.empty()) throw DataError("no records to score");
  std::size_t correct = 0;
  for (const auto& r : records) {
    const int predicted = pairwise_logit(model, r) > 0.0 ? 1 : 0;
    correct += predicted == r.label;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

double prediction_accuracy(const RfmModel& model, std::span<const PreferenceRecord> records) {
  return prediction_accuracy(model, prepare_records(model, records));
}

TrainResult train(std::span<const PreferenceRecord> records, const TrainConfig& config, const EncoderConfig& encoder,
                  const FeatureContext& features) {
  config.validate();
  encoder.validate();
  if (records.empty()) throw DataError("no training records");
  if (records.size() < 2) throw DataError("need at least two records to hold out a validation split");

  std::vector<std::string> raters;
  if (!config.baseline_mode) {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.rater_id);
    raters.assign(ids.begin(), ids.end());
  }
  EncoderConfig enc = encoder;
  RfmModel model(enc, raters, config.baseline_mode, features.normalizer, features.extractor, config.loss_floor);

  auto [train_idx, val_idx] = split_indices(records.size(), config.validation_fraction, config.seed);
  if (train_idx.empty()) throw DataError("validation split leaves no training records");
  std::vector<PreferenceRecord> train_records, val_records;
  for (std::size_t i : train_idx) train_records.push_back(records[i]);
  for (std::size_t i : val_idx) val_records.push_back(records[i]);
  const auto train_set = prepare_records(model, train_records);
  const auto val_set = prepare_records(model, val_records);

  TrainingReport report;
  report.train_size = train_set.size();
  report.validation_size = val_set.size();
  report.rater_count = model.heads().rows();

  std::vector<double> best_theta(model.encoder().parameters().begin(), model.encoder().parameters().end());
  Eigen::MatrixXd best_heads = model.heads();
  auto snapshot = [&](std::size_t update, double train_loss) {
    CurvePoint p{update, train_loss, training_loss(model, val_set), prediction_accuracy(model, val_set)};
    report.curve.push_back(p);
    if (report.curve.size() == 1 || p.validation_accuracy > report.selected().validation_accuracy) {
      report.selected_point = report.curve.size() - 1;
      auto theta = model.encoder().parameters();
      best_theta.assign(theta.begin(), theta.end());
      best_heads = model.heads();
    }
  };
  snapshot(0, training_loss(model, train_set));

  Rng rng(derive_seed(config.seed, "batches"));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  auto theta = model.encoder().parameters();
  std::vector<double> velocity(theta.size(), 0.0);
  Eigen::MatrixXd head_velocity = Eigen::MatrixXd::Zero(model.heads().rows(), model.heads().cols());
  ModelGradient grad;
  std::vector<PreparedRecord> batch;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  for (std::size_t step = 1; step <= config.total_updates; ++step) {
    batch.clear();
    for (std::size_t k = 0; k < config.batch_size; ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(train_set[order[cursor++]]);
    }
    loss_sum += loss_and_gradient(model, batch, grad);
    ++loss_count;
    if (config.head_l2 > 0.0) grad.heads += 2.0 * config.head_l2 * model.heads();

    for (std::size_t i = 0; i < theta.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] - config.learning_rate * grad.encoder[i];
      theta[i] += velocity[i];
    }
    head_velocity = config.momentum * head_velocity - config.learning_rate * grad.heads;
    model.heads() += head_velocity;

    if (step % config.eval_interval == 0 || step == config.total_updates) {
      snapshot(step, loss_sum / static_cast<double>(loss_count));
      loss_sum = 0.0;
      loss_count = 0;
    }
  }

  std::copy(best_theta.begin(), best_theta.end(), theta.begin());
  model.heads() = best_heads;
  return {std::move(model), std::move(report)};
}

std::string training_report_to_json(const TrainingReport& report) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : report.curve) {
    curve.push_back({{"update", p.update},
                     {"train_loss", p.train_loss},
                     {"validation_loss", p.validation_loss},
                     {"validation_accuracy", p.validation_accuracy}});
  }
  nlohmann::json j = {{"format", "rfm-training-report"},
                      {"version", 1},
                      {"train_size", report.train_size},
                      {"validation_size", report.validation_size},
                      {"rater_count", report.rater_count},
                      {"selected_point", report.selected_point},
                      {"selected_update", report.selected().update},
                      {"curve", curve}};
  return j.dump(2);
}

void save_training_report(const std::filesystem::path& path, const TrainingReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << training_report_to_json(report) << '\n';
}

}  // namespace rfm
