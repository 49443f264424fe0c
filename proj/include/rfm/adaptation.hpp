#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfm/dataset.hpp"
#include "rfm/model.hpp"

namespace rfm {

struct AdaptationSample {
  Eigen::VectorXd delta;  // phi(x,y) - phi(x,y')
  int label = 0;
};

struct AdaptedHead {
  std::string user_id;
  Eigen::VectorXd w;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct AdaptConfig {
  double l2_penalty = 1e-4;
  std::size_t max_iterations = 5000;
  double gradient_tolerance = 1e-8;
  double learning_rate = 1.0;  // initial step of each backtracking search
  double loss_floor = kDefaultLossFloor;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabelledPair {
  PreferencePair pair;
  int label = 0;
};

std::vector<AdaptationSample> build_adaptation_set(const RfmModel& model, std::span<const LabelledPair> data);

// Mean capped-log loss plus l2_penalty * ||w||^2.
double adaptation_loss(const Eigen::VectorXd& w, std::span<const AdaptationSample> samples, double l2_penalty,
                       double loss_floor = kDefaultLossFloor);
Eigen::VectorXd adaptation_gradient(const Eigen::VectorXd& w, std::span<const AdaptationSample> samples,
                                    double l2_penalty, double loss_floor = kDefaultLossFloor);

// Full-batch gradient descent from w = 0 with Armijo backtracking. The loss
// trace (one value per accepted iterate, starting at w = 0) is appended to
// `trace` when given.
AdaptedHead adapt(std::span<const AdaptationSample> samples, const AdaptConfig& config = {},
                  std::vector<double>* trace = nullptr);

double predict(const AdaptedHead& head, const Eigen::VectorXd& delta);

std::string head_to_json(const AdaptedHead& head);
AdaptedHead head_from_json(std::string_view text);
void save_heads(const std::filesystem::path& path, std::span<const AdaptedHead> heads);
std::vector<AdaptedHead> load_heads(const std::filesystem::path& path);

}  // namespace rfm
