#include "rfm/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {
namespace {

void check_dims(const Eigen::VectorXd& w, std::span<const AdaptationSample> samples) {
  for (const auto& s : samples) {
    if (s.delta.size() != w.size()) throw DataError("adaptation sample dimension does not match the head");
  }
}

// Samples in a canonical order so the floating-point sums do not depend on
// the order the caller supplied them in.
std::vector<AdaptationSample> canonical(std::span<const AdaptationSample> samples) {
  std::vector<AdaptationSample> out(samples.begin(), samples.end());
  std::stable_sort(out.begin(), out.end(), [](const AdaptationSample& a, const AdaptationSample& b) {
    if (a.label != b.label) return a.label < b.label;
    return std::lexicographical_compare(a.delta.data(), a.delta.data() + a.delta.size(), b.delta.data(),
                                        b.delta.data() + b.delta.size());
  });
  return out;
}

}  // namespace

void AdaptConfig::validate() const {
  if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) throw ConfigError("l2_penalty", "must be non-negative");
  if (max_iterations < 1) throw ConfigError("max_iterations", "must be positive");
  if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance", "must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate", "must be positive");
  if (!(loss_floor < 0.0)) throw ConfigError("loss_floor", "must be negative");
}

std::vector<AdaptationSample> build_adaptation_set(const RfmModel& model, std::span<const LabelledPair> data) {
  if (data.empty()) throw DataError("no labelled pairs to adapt on");
  std::vector<AdaptationSample> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    if (d.label != 0 && d.label != 1) throw DataError("label must be 0 or 1");
    out.push_back({encode(model, d.pair.context, d.pair.response_a) - encode(model, d.pair.context, d.pair.response_b),
                   d.label});
  }
  return out;
}

double adaptation_loss(const Eigen::VectorXd& w, std::span<const AdaptationSample> samples, double l2_penalty,
                       double loss_floor) {
  if (samples.empty()) throw DataError("no adaptation samples");
  check_dims(w, samples);
  double total = 0.0;
  for (const auto& s : samples) {
    const double logit = s.delta.dot(w);
    total += s.label == 1 ? capped_log_sigmoid(logit, loss_floor) : capped_log_sigmoid(-logit, loss_floor);
  }
  return total / static_cast<double>(samples.size()) + l2_penalty * w.squaredNorm();
}

Eigen::VectorXd adaptation_gradient(const Eigen::VectorXd& w, std::span<const AdaptationSample> samples,
                                    double l2_penalty, double loss_floor) {
  if (samples.empty()) throw DataError("no adaptation samples");
  check_dims(w, samples);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (const auto& s : samples) {
    const double logit = s.delta.dot(w);
    const double signed_logit = s.label == 1 ? logit : -logit;
    // Flat beyond the cap.
    if (capped_log_sigmoid(signed_logit, loss_floor) >= 1.0) continue;
    const double d = sigmoid(-signed_logit) / loss_floor;  // d/d(signed_logit)
    g += (s.label == 1 ? d : -d) * s.delta;
  }
  g /= static_cast<double>(samples.size());
  g += 2.0 * l2_penalty * w;
  return g;
}

AdaptedHead adapt(std::span<const AdaptationSample> input, const AdaptConfig& config, std::vector<double>* trace) {
  config.validate();
  if (input.empty()) throw DataError("no adaptation samples");
  const auto samples = canonical(input);
  const auto dim = samples.front().delta.size();
  for (const auto& s : samples) {
    if (s.delta.size() != dim) throw DataError("adaptation samples have inconsistent dimensions");
    if (!s.delta.allFinite()) throw DataError("non-finite adaptation features");
  }

  AdaptedHead head;
  head.w = Eigen::VectorXd::Zero(dim);
  double loss = adaptation_loss(head.w, samples, config.l2_penalty, config.loss_floor);
  if (trace) trace->push_back(loss);
  double step = config.learning_rate;
  constexpr double kArmijo = 1e-4;

  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const Eigen::VectorXd g = adaptation_gradient(head.w, samples, config.l2_penalty, config.loss_floor);
    const double gnorm2 = g.squaredNorm();
    if (std::sqrt(gnorm2) <= config.gradient_tolerance) {
      head.converged = true;
      break;
    }
    // Backtrack until sufficient decrease; grow the step again afterwards.
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::VectorXd candidate = head.w - step * g;
      const double next = adaptation_loss(candidate, samples, config.l2_penalty, config.loss_floor);
      if (!std::isfinite(next)) throw DataError("adaptation loss became non-finite");
      if (next <= loss - kArmijo * step * gnorm2) {
        head.w = candidate;
        loss = next;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    head.iterations = it + 1;
    if (!accepted) {
      // No representable descent step left: stationary to working precision.
      head.converged = std::sqrt(gnorm2) <= std::sqrt(config.gradient_tolerance);
      break;
    }
    if (trace) trace->push_back(loss);
    step = std::min(step * 2.0, config.learning_rate * 1024.0);
  }
  if (!head.converged) {
    head.converged =
        adaptation_gradient(head.w, samples, config.l2_penalty, config.loss_floor).norm() <= config.gradient_tolerance;
  }
  head.final_loss = loss;
  return head;
}

double predict(const AdaptedHead& head, const Eigen::VectorXd& delta) {
  if (delta.size() != head.w.size()) throw DataError("feature dimension does not match the head");
  return sigmoid(delta.dot(head.w));
}

std::string head_to_json(const AdaptedHead& head) {
  std::vector<double> w(head.w.data(), head.w.data() + head.w.size());
  nlohmann::json j = {{"id", head.user_id},          {"d", w.size()},
                      {"w", w},                      {"final_loss", head.final_loss},
                      {"iterations", head.iterations}, {"converged", head.converged}};
  return j.dump();
}

AdaptedHead head_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    AdaptedHead h;
    h.user_id = j.at("id").get<std::string>();
    const auto w = j.at("w").get<std::vector<double>>();
    if (w.size() != j.at("d").get<std::size_t>()) throw DataError("head width does not match d");
    h.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    if (!h.w.allFinite()) throw DataError("head has non-finite entries");
    h.final_loss = j.at("final_loss").get<double>();
    h.iterations = j.at("iterations").get<std::size_t>();
    h.converged = j.at("converged").get<bool>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed head: ") + e.what());
  }
}

void save_heads(const std::filesystem::path& path, std::span<const AdaptedHead> heads) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& h : heads) out << head_to_json(h) << '\n';
}

std::vector<AdaptedHead> load_heads(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<AdaptedHead> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(head_from_json(line));
    } catch (const DataError& e) {
      throw DataError(e.what(), n);
    }
  }
  return out;
}

}  // namespace rfm
