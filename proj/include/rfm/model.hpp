#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "rfm/dataset.hpp"
#include "rfm/encoder.hpp"
#include "rfm/text_features.hpp"

namespace rfm {

inline constexpr double kDefaultLossFloor = -20.0;

// max(ln u, floor) / floor. u <= 0 saturates at 1; u must not exceed 1.
double capped_log(double u, double floor = kDefaultLossFloor);
// capped_log(sigmoid(s)) evaluated without forming sigmoid(s).
double capped_log_sigmoid(double s, double floor = kDefaultLossFloor);
double sigmoid(double s);

// Reward-feature model: shared encoder phi_theta plus one linear head per rater.
class RfmModel {
 public:
  // Oracle mode requires a normalizer. When shared_head is set every rater id
  // resolves to the single row of W.
  RfmModel(EncoderConfig encoder, std::vector<std::string> raters, bool shared_head = false,
           std::optional<FeatureNormalizer> normalizer = std::nullopt,
           std::shared_ptr<const FeatureExtractor> extractor = nullptr, double loss_floor = kDefaultLossFloor);

  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Eigen::MatrixXd& heads() { return heads_; }  // |raters| x d
  const Eigen::MatrixXd& heads() const { return heads_; }

  const std::vector<std::string>& raters() const { return raters_; }
  bool shared_head() const { return shared_head_; }
  double loss_floor() const { return loss_floor_; }
  std::size_t feature_dim() const { return encoder_.config().feature_dim; }
  const std::optional<FeatureNormalizer>& normalizer() const { return normalizer_; }
  const FeatureExtractor& extractor() const { return *extractor_; }
  std::shared_ptr<const FeatureExtractor> extractor_ptr() const { return extractor_; }

  bool knows(std::string_view rater) const;
  // Throws DataError for an unknown rater.
  std::size_t head_row(std::string_view rater) const;

  // Encoder input for a (context, response) occurrence.
  SparseInput input(std::string_view context, std::string_view response) const;

 private:
  Encoder encoder_;
  Eigen::MatrixXd heads_;
  std::vector<std::string> raters_;
  std::unordered_map<std::string, std::size_t> index_;
  bool shared_head_;
  std::optional<FeatureNormalizer> normalizer_;
  std::shared_ptr<const FeatureExtractor> extractor_;
  double loss_floor_;
};

Eigen::VectorXd encode(const RfmModel& model, std::string_view context, std::string_view response);

// <phi(x,y) - phi(x,y'), w_rater>
double pairwise_logit(const RfmModel& model, std::string_view rater, const PreferencePair& pair);
double pairwise_probability(const RfmModel& model, std::string_view rater, const PreferencePair& pair);

// A record with its encoder inputs precomputed.
struct PreparedRecord {
  std::size_t head = 0;
  SparseInput a;
  SparseInput b;
  int label = 0;
};

std::vector<PreparedRecord> prepare_records(const RfmModel& model, std::span<const PreferenceRecord> records);

double pairwise_logit(const RfmModel& model, const PreparedRecord& record);

double training_loss(const RfmModel& model, std::span<const PreferenceRecord> batch);
double training_loss(const RfmModel& model, std::span<const PreparedRecord> batch);

struct ModelGradient {
  std::vector<double> encoder;  // same layout as Encoder::parameters()
  Eigen::MatrixXd heads;
};

ModelGradient loss_gradient(const RfmModel& model, std::span<const PreferenceRecord> batch);
// Returns the batch loss and writes the gradient into `out` (resized as needed).
double loss_and_gradient(const RfmModel& model, std::span<const PreparedRecord> batch, ModelGradient& out);

// Versioned JSON parameter file. On load, `expected` (when given) must match
// the stored normalizer fingerprint.
void save_model(const std::filesystem::path& path, const RfmModel& model);
RfmModel load_model(const std::filesystem::path& path, const FeatureNormalizer* expected = nullptr,
                    std::shared_ptr<const FeatureExtractor> extractor = nullptr);
std::string model_to_json(const RfmModel& model);
RfmModel model_from_json(std::string_view text, const FeatureNormalizer* expected = nullptr,
                         std::shared_ptr<const FeatureExtractor> extractor = nullptr);

}  // namespace rfm
