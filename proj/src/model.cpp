#include "rfm/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/random.hpp"

namespace rfm {
namespace {

using json = nlohmann::json;

// log(sigmoid(s)), stable for large |s|.
double log_sigmoid(double s) {
  return s >= 0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
}

void check_floor(double floor) {
  if (!(floor < 0.0) || !std::isfinite(floor)) throw ConfigError("loss_floor", "must be a finite negative number");
}

}  // namespace

// Negative arguments use the complement so that sigmoid(s) + sigmoid(-s) == 1
// exactly (1 - q is exact for q in [0.5, 1]).
double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  return 1.0 - 1.0 / (1.0 + std::exp(s));
}

double capped_log(double u, double floor) {
  check_floor(floor);
  if (std::isnan(u) || u > 1.0) throw DataError("capped_log argument must lie in (0, 1]");
  if (u <= 0.0) return 1.0;
  return std::max(std::log(u), floor) / floor;
}

double capped_log_sigmoid(double s, double floor) {
  if (std::isnan(s)) throw DataError("non-finite logit");
  return std::max(log_sigmoid(s), floor) / floor;
}

RfmModel::RfmModel(EncoderConfig encoder, std::vector<std::string> raters, bool shared_head,
                   std::optional<FeatureNormalizer> normalizer, std::shared_ptr<const FeatureExtractor> extractor,
                   double loss_floor)
    : encoder_(std::move(encoder)),
      raters_(std::move(raters)),
      shared_head_(shared_head),
      normalizer_(std::move(normalizer)),
      extractor_(extractor ? std::move(extractor) : std::make_shared<const FeatureExtractor>()),
      loss_floor_(loss_floor) {
  check_floor(loss_floor_);
  if (encoder_.config().mode == EncoderMode::OracleBaseFeatures && !normalizer_) {
    throw ConfigError("normalizer", "oracle encoder mode needs a fitted normalizer");
  }
  if (shared_head_) {
    if (raters_.empty()) raters_.push_back("*");
    if (raters_.size() != 1) throw ConfigError("shared_head", "a shared-head model has exactly one head");
  }
  if (raters_.empty()) throw DataError("model needs at least one rater");
  for (std::size_t i = 0; i < raters_.size(); ++i) {
    if (!index_.emplace(raters_[i], i).second) throw DataError("duplicate rater id '" + raters_[i] + "'");
  }
  const auto d = static_cast<Eigen::Index>(feature_dim());
  heads_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(raters_.size()), d);
  Rng rng(derive_seed(encoder_.config().seed, "heads-init"));
  const double scale = std::sqrt(3.0 / static_cast<double>(d));
  for (Eigen::Index r = 0; r < heads_.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) heads_(r, c) = rng.uniform(-scale, scale);
  }
}

bool RfmModel::knows(std::string_view rater) const {
  return shared_head_ || index_.contains(std::string(rater));
}

std::size_t RfmModel::head_row(std::string_view rater) const {
  if (shared_head_) return 0;
  auto it = index_.find(std::string(rater));
  if (it == index_.end()) throw DataError("unknown rater '" + std::string(rater) + "'");
  return it->second;
}

SparseInput RfmModel::input(std::string_view context, std::string_view response) const {
  const auto& cfg = encoder_.config();
  if (cfg.mode == EncoderMode::HashedNgrams) return hash_ngrams(context, response, cfg.hash_dim);
  const auto features = normalizer_->apply(extractor_->extract_raw_features(context, response));
  return dense_input(features);
}

Eigen::VectorXd encode(const RfmModel& model, std::string_view context, std::string_view response) {
  return model.encoder().forward(model.input(context, response));
}

double pairwise_logit(const RfmModel& model, std::string_view rater, const PreferencePair& pair) {
  const std::size_t row = model.head_row(rater);
  const Eigen::VectorXd delta =
      encode(model, pair.context, pair.response_a) - encode(model, pair.context, pair.response_b);
  return model.heads().row(static_cast<Eigen::Index>(row)).dot(delta);
}

double pairwise_probability(const RfmModel& model, std::string_view rater, const PreferencePair& pair) {
  return sigmoid(pairwise_logit(model, rater, pair));
}

std::vector<PreparedRecord> prepare_records(const RfmModel& model, std::span<const PreferenceRecord> records) {
  std::vector<PreparedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.label != 0 && r.label != 1) throw DataError("label must be 0 or 1");
    out.push_back({model.head_row(r.rater_id), model.input(r.pair.context, r.pair.response_a),
                   model.input(r.pair.context, r.pair.response_b), r.label});
  }
  return out;
}

double pairwise_logit(const RfmModel& model, const PreparedRecord& record) {
  const Eigen::VectorXd delta = model.encoder().forward(record.a) - model.encoder().forward(record.b);
  return model.heads().row(static_cast<Eigen::Index>(record.head)).dot(delta);
}

double training_loss(const RfmModel& model, std::span<const PreparedRecord> batch) {
  if (batch.empty()) throw DataError("empty batch");
  double total = 0.0;
  for (const auto& r : batch) {
    const double s = pairwise_logit(model, r);
    total += r.label == 1 ? capped_log_sigmoid(s, model.loss_floor()) : capped_log_sigmoid(-s, model.loss_floor());
  }
  return total / static_cast<double>(batch.size());
}

double training_loss(const RfmModel& model, std::span<const PreferenceRecord> batch) {
  if (batch.empty()) throw DataError("empty batch");
  return training_loss(model, prepare_records(model, batch));
}

double loss_and_gradient(const RfmModel& model, std::span<const PreparedRecord> batch, ModelGradient& out) {
  if (batch.empty()) throw DataError("empty batch");
  const auto& enc = model.encoder();
  const double floor = model.loss_floor();
  out.encoder.assign(enc.parameters().size(), 0.0);
  out.heads = Eigen::MatrixXd::Zero(model.heads().rows(), model.heads().cols());
  const double inv = 1.0 / static_cast<double>(batch.size());

  Encoder::Trace ta, tb;
  double total = 0.0;
  for (const auto& r : batch) {
    const Eigen::VectorXd fa = enc.forward(r.a, ta);
    const Eigen::VectorXd fb = enc.forward(r.b, tb);
    const auto row = static_cast<Eigen::Index>(r.head);
    const Eigen::VectorXd delta = fa - fb;
    const double s = model.heads().row(row).dot(delta);

    // d(loss)/ds; zero where the log is capped.
    double g = 0.0;
    if (r.label == 1) {
      const double ls = log_sigmoid(s);
      total += std::max(ls, floor) / floor;
      if (ls > floor) g = sigmoid(-s) / floor;
    } else {
      const double ls = log_sigmoid(-s);
      total += std::max(ls, floor) / floor;
      if (ls > floor) g = -sigmoid(s) / floor;
    }
    if (g == 0.0) continue;
    g *= inv;
    out.heads.row(row) += g * delta.transpose();
    const Eigen::VectorXd gphi = g * model.heads().row(row).transpose();
    enc.backward(r.a, ta, gphi, out.encoder);
    enc.backward(r.b, tb, -gphi, out.encoder);
  }
  return total * inv;
}

ModelGradient loss_gradient(const RfmModel& model, std::span<const PreferenceRecord> batch) {
  if (batch.empty()) throw DataError("empty batch");
  ModelGradient g;
  loss_and_gradient(model, prepare_records(model, batch), g);
  return g;
}

std::string model_to_json(const RfmModel& model) {
  const auto& cfg = model.encoder().config();
  json j;
  j["format"] = "rfm-model";
  j["version"] = 1;
  j["encoder"] = {{"mode", to_string(cfg.mode)},
                  {"hash_dim", cfg.hash_dim},
                  {"hidden_layers", cfg.hidden_layers},
                  {"feature_dim", cfg.feature_dim},
                  {"seed", cfg.seed}};
  const auto p = model.encoder().parameters();
  j["theta"] = std::vector<double>(p.begin(), p.end());
  json heads = json::array();
  for (Eigen::Index r = 0; r < model.heads().rows(); ++r) {
    std::vector<double> row(model.heads().cols());
    for (Eigen::Index c = 0; c < model.heads().cols(); ++c) row[c] = model.heads()(r, c);
    heads.push_back(row);
  }
  j["heads"] = heads;
  j["raters"] = model.raters();
  j["shared_head"] = model.shared_head();
  j["loss_floor"] = model.loss_floor();
  if (model.normalizer()) {
    j["normalizer"] = json::parse(normalizer_to_json(*model.normalizer()));
    j["normalizer_fingerprint"] = model.normalizer()->fingerprint();
  } else {
    j["normalizer"] = nullptr;
    j["normalizer_fingerprint"] = nullptr;
  }
  return j.dump();
}

RfmModel model_from_json(std::string_view text, const FeatureNormalizer* expected,
                         std::shared_ptr<const FeatureExtractor> extractor) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "rfm-model") throw DataError("not an rfm model file");
    if (j.at("version") != 1) throw DataError("unsupported model version " + j.at("version").dump());
    const auto& e = j.at("encoder");
    EncoderConfig cfg;
    cfg.mode = parse_encoder_mode(e.at("mode").get<std::string>());
    cfg.hash_dim = e.at("hash_dim").get<std::size_t>();
    cfg.hidden_layers = e.at("hidden_layers").get<std::vector<std::size_t>>();
    cfg.feature_dim = e.at("feature_dim").get<std::size_t>();
    cfg.seed = e.at("seed").get<std::uint64_t>();

    std::optional<FeatureNormalizer> normalizer;
    if (!j.at("normalizer").is_null()) {
      normalizer = normalizer_from_json(j.at("normalizer").dump());
      if (normalizer->fingerprint() != j.at("normalizer_fingerprint").get<std::string>()) {
        throw DataError("stored normalizer does not match its fingerprint");
      }
    }
    if (expected) {
      if (!normalizer) throw DataError("model was saved without a normalizer");
      if (expected->fingerprint() != normalizer->fingerprint()) {
        throw DataError("normalizer fingerprint mismatch: model " + normalizer->fingerprint() + ", expected " +
                        expected->fingerprint());
      }
    }

    RfmModel model(cfg, j.at("raters").get<std::vector<std::string>>(), j.at("shared_head").get<bool>(), normalizer,
                   std::move(extractor), j.at("loss_floor").get<double>());
    const auto theta = j.at("theta").get<std::vector<double>>();
    auto params = model.encoder().parameters();
    if (theta.size() != params.size()) throw DataError("theta has the wrong number of parameters");
    std::copy(theta.begin(), theta.end(), params.begin());
    const auto heads = j.at("heads").get<std::vector<std::vector<double>>>();
    if (heads.size() != static_cast<std::size_t>(model.heads().rows())) throw DataError("head count mismatch");
    for (std::size_t r = 0; r < heads.size(); ++r) {
      if (heads[r].size() != model.feature_dim()) throw DataError("head width does not match feature_dim");
      for (std::size_t c = 0; c < heads[r].size(); ++c) model.heads()(r, c) = heads[r][c];
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const RfmModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

RfmModel load_model(const std::filesystem::path& path, const FeatureNormalizer* expected,
                    std::shared_ptr<const FeatureExtractor> extractor) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str(), expected, std::move(extractor));
}

}  // namespace rfm
