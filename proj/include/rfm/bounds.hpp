#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rfm/random.hpp"

namespace rfm {

struct CoverEntry {
  double alpha = 1.0;
  double log_size = 0.0;  // ln |C_alpha|
};

struct BoundInput {
  std::size_t m = 1;  // raters
  std::size_t n = 1;  // examples per rater
  double delta = 0.05;
  double within_var = 0.0;   // E[V(loss | H)]
  double between_var = 0.0;  // V(E[loss | H])
  std::vector<CoverEntry> cover;
  std::optional<double> weight_norm;

  void validate() const;
};

struct VarianceDecomposition {
  double within = 0.0;
  double between = 0.0;
};

// Unbiased estimators: mean of per-rater sample variances, and the sample
// variance of the per-rater means.
VarianceDecomposition variance_decomposition(std::span<const std::vector<double>> per_rater_losses);

// (1/3m) [g + sqrt(g^2 + 18 g m (within/n + between))] with g = ln(2/delta).
double epsilon_single(const BoundInput& in);
// Same expression with an explicit g.
double epsilon_with_g(double g, std::size_t m, std::size_t n, double within, double between);
// n -> infinity limit of epsilon_single.
double epsilon_limit_n(const BoundInput& in);

// 2 * min over the cover grid of [eps(g_alpha) + 2 alpha], g_alpha = ln(2 |C_alpha| / delta).
double epsilon_uniform(const BoundInput& in);

// |H| |K| ln(1/alpha); 0 at alpha = 1.
double covering_number_bound(double alpha, std::size_t h_size, std::size_t k_size);

// The grid {(2i-1)/(2q) : i = 1..q}, q = ceil(1/(2 alpha)); every point of
// [0,1] lies within alpha of it.
std::vector<double> covering_grid(double alpha);

// Additive slack of the Rademacher bound (excludes the unknown L_D(c*)):
// 2W/sqrt(m) + 3 sqrt(g/2m) + eps(g), g = ln(6/delta).
double rademacher_excess_bound(const BoundInput& in);

// A finite population of users, each with a finite loss distribution.
struct ToyDistribution {
  struct Outcome {
    double loss = 0.0;
    double probability = 0.0;
  };
  struct User {
    double weight = 0.0;
    std::vector<Outcome> outcomes;
  };
  std::vector<User> users;

  void validate() const;
};

ToyDistribution toy_from_json(std::string_view text);
ToyDistribution load_toy_distribution(const std::filesystem::path& path);

struct ExactMoments {
  double mean = 0.0;     // L_D
  double within = 0.0;   // E[V(loss | H)]
  double between = 0.0;  // V(E[loss | H])
};

ExactMoments exact_moments(const ToyDistribution& dist);

// Variance of the mean of n losses drawn from a single random user, by
// enumerating every outcome-count composition.
double exact_mean_loss_variance(const ToyDistribution& dist, std::size_t n);

// Draws `trials` samples of m users x n losses and returns the fraction with
// |L_D - L_S| > epsilon_single (exact variances).
double monte_carlo_coverage(const ToyDistribution& dist, std::size_t m, std::size_t n, double delta,
                            std::size_t trials, std::uint64_t seed);

// Samples per-rater loss lists from the toy (used to exercise the estimator).
std::vector<std::vector<double>> sample_toy_losses(const ToyDistribution& dist, std::size_t m, std::size_t n,
                                                   Rng& rng);

}  // namespace rfm
