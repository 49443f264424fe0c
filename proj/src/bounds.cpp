#include "rfm/bounds.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {
namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double unbiased_variance(std::span<const double> v) {
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

// Calls f(counts) for every vector of k non-negative integers summing to n.
template <typename F>
void for_each_composition(std::size_t k, std::size_t n, std::vector<std::size_t>& counts, std::size_t pos,
                          std::size_t left, F&& f) {
  if (pos + 1 == k) {
    counts[pos] = left;
    f(counts);
    return;
  }
  for (std::size_t c = 0; c <= left; ++c) {
    counts[pos] = c;
    for_each_composition(k, n, counts, pos + 1, left - c, f);
  }
}

double log_multinomial(std::size_t n, const std::vector<std::size_t>& counts) {
  double r = std::lgamma(static_cast<double>(n) + 1.0);
  for (std::size_t c : counts) r -= std::lgamma(static_cast<double>(c) + 1.0);
  return r;
}

}  // namespace

void BoundInput::validate() const {
  if (m < 1) throw ConfigError("m", "must be at least 1");
  if (n < 1) throw ConfigError("n", "must be at least 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta", "must lie in (0, 1]");
  if (!(within_var >= 0.0) || !std::isfinite(within_var)) throw ConfigError("within_var", "must be non-negative");
  if (!(between_var >= 0.0) || !std::isfinite(between_var)) throw ConfigError("between_var", "must be non-negative");
  for (const auto& c : cover) {
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ConfigError("cover", "alpha must lie in (0, 1]");
    if (!(c.log_size >= 0.0)) throw ConfigError("cover", "ln |C_alpha| must be non-negative");
  }
  if (weight_norm && !(*weight_norm >= 0.0)) throw ConfigError("weight_norm", "must be non-negative");
}

VarianceDecomposition variance_decomposition(std::span<const std::vector<double>> per_rater) {
  if (per_rater.size() < 2) throw DataError("variance decomposition needs at least two raters");
  std::vector<double> means, vars;
  for (const auto& losses : per_rater) {
    if (losses.size() < 2) throw DataError("variance decomposition needs at least two losses per rater");
    means.push_back(mean_of(losses));
    vars.push_back(unbiased_variance(losses));
  }
  return {mean_of(vars), unbiased_variance(means)};
}

double epsilon_with_g(double g, std::size_t m, std::size_t n, double within, double between) {
  const double md = static_cast<double>(m);
  const double v = within / static_cast<double>(n) + between;
  return (g + std::sqrt(g * g + 18.0 * g * md * v)) / (3.0 * md);
}

double epsilon_single(const BoundInput& in) {
  in.validate();
  return epsilon_with_g(std::log(2.0 / in.delta), in.m, in.n, in.within_var, in.between_var);
}

double epsilon_limit_n(const BoundInput& in) {
  in.validate();
  const double g = std::log(2.0 / in.delta);
  const double md = static_cast<double>(in.m);
  return (g + std::sqrt(g * g + 18.0 * g * md * in.between_var)) / (3.0 * md);
}

double epsilon_uniform(const BoundInput& in) {
  in.validate();
  if (in.cover.empty()) throw ConfigError("cover", "needs at least one (alpha, ln|C_alpha|) entry");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : in.cover) {
    const double g = std::log(2.0 / in.delta) + c.log_size;
    best = std::min(best, epsilon_with_g(g, in.m, in.n, in.within_var, in.between_var) + 2.0 * c.alpha);
  }
  return 2.0 * best;
}

double covering_number_bound(double alpha, std::size_t h_size, std::size_t k_size) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1]");
  if (h_size < 1 || k_size < 1) throw ConfigError("size", "|H| and |K| must be at least 1");
  if (alpha == 1.0) return 0.0;
  return static_cast<double>(h_size) * static_cast<double>(k_size) * std::log(1.0 / alpha);
}

std::vector<double> covering_grid(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "must lie in (0, 1]");
  const auto q = static_cast<std::size_t>(std::ceil(1.0 / (2.0 * alpha) - 1e-12));
  std::vector<double> grid;
  for (std::size_t i = 1; i <= q; ++i) grid.push_back((2.0 * i - 1.0) / (2.0 * q));
  return grid;
}

double rademacher_excess_bound(const BoundInput& in) {
  in.validate();
  if (!in.weight_norm) throw ConfigError("weight_norm", "required for the Rademacher bound");
  const double g = std::log(6.0 / in.delta);
  const double md = static_cast<double>(in.m);
  return 2.0 * *in.weight_norm / std::sqrt(md) + 3.0 * std::sqrt(g / (2.0 * md)) +
         epsilon_with_g(g, in.m, in.n, in.within_var, in.between_var);
}

void ToyDistribution::validate() const {
  if (users.empty() || users.size() > 8) throw DataError("toy distribution needs 1 to 8 users");
  double total = 0.0;
  for (const auto& u : users) {
    if (!(u.weight >= 0.0)) throw DataError("user weights must be non-negative");
    total += u.weight;
    if (u.outcomes.empty() || u.outcomes.size() > 16) throw DataError("each user needs 1 to 16 outcomes");
    double p = 0.0;
    for (const auto& o : u.outcomes) {
      if (!(o.loss >= 0.0 && o.loss <= 1.0)) throw DataError("loss values must lie in [0, 1]");
      if (!(o.probability >= 0.0)) throw DataError("outcome probabilities must be non-negative");
      p += o.probability;
    }
    if (std::abs(p - 1.0) > 1e-9) throw DataError("outcome probabilities must sum to 1");
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("user weights must sum to 1");
}

ToyDistribution toy_from_json(std::string_view text) {
  ToyDistribution d;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& u : j.at("users")) {
      ToyDistribution::User user;
      user.weight = u.at("weight").get<double>();
      for (const auto& o : u.at("outcomes")) {
        user.outcomes.push_back({o.at("loss").get<double>(), o.at("p").get<double>()});
      }
      d.users.push_back(std::move(user));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed toy distribution: ") + e.what());
  }
  d.validate();
  return d;
}

ToyDistribution load_toy_distribution(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return toy_from_json(ss.str());
}

ExactMoments exact_moments(const ToyDistribution& dist) {
  dist.validate();
  std::vector<double> mu(dist.users.size()), var(dist.users.size());
  for (std::size_t h = 0; h < dist.users.size(); ++h) {
    double m = 0.0;
    for (const auto& o : dist.users[h].outcomes) m += o.probability * o.loss;
    double v = 0.0;
    for (const auto& o : dist.users[h].outcomes) v += o.probability * (o.loss - m) * (o.loss - m);
    mu[h] = m;
    var[h] = v;
  }
  ExactMoments r;
  for (std::size_t h = 0; h < mu.size(); ++h) r.mean += dist.users[h].weight * mu[h];
  for (std::size_t h = 0; h < mu.size(); ++h) {
    r.within += dist.users[h].weight * var[h];
    r.between += dist.users[h].weight * (mu[h] - r.mean) * (mu[h] - r.mean);
  }
  return r;
}

double exact_mean_loss_variance(const ToyDistribution& dist, std::size_t n) {
  dist.validate();
  if (n < 1) throw ConfigError("n", "must be at least 1");
  // Support of the sample mean: (probability, value) atoms over users and
  // count compositions.
  std::vector<std::pair<double, double>> atoms;
  for (const auto& u : dist.users) {
    if (u.weight == 0.0) continue;
    const std::size_t k = u.outcomes.size();
    std::vector<std::size_t> counts(k);
    for_each_composition(k, n, counts, 0, n, [&](const std::vector<std::size_t>& c) {
      double logp = log_multinomial(n, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (c[i] == 0) continue;
        if (u.outcomes[i].probability == 0.0) return;
        logp += static_cast<double>(c[i]) * std::log(u.outcomes[i].probability);
        sum += static_cast<double>(c[i]) * u.outcomes[i].loss;
      }
      atoms.emplace_back(u.weight * std::exp(logp), sum / static_cast<double>(n));
    });
  }
  double mean = 0.0;
  for (const auto& [p, x] : atoms) mean += p * x;
  double var = 0.0;
  for (const auto& [p, x] : atoms) var += p * (x - mean) * (x - mean);
  return var;
}

std::vector<std::vector<double>> sample_toy_losses(const ToyDistribution& dist, std::size_t m, std::size_t n,
                                                   Rng& rng) {
  std::vector<double> weights;
  for (const auto& u : dist.users) weights.push_back(u.weight);
  std::vector<std::vector<double>> out(m);
  for (auto& losses : out) {
    const auto& user = dist.users[rng.categorical(weights)];
    std::vector<double> probs;
    for (const auto& o : user.outcomes) probs.push_back(o.probability);
    losses.reserve(n);
    for (std::size_t j = 0; j < n; ++j) losses.push_back(user.outcomes[rng.categorical(probs)].loss);
  }
  return out;
}

double monte_carlo_coverage(const ToyDistribution& dist, std::size_t m, std::size_t n, double delta,
                            std::size_t trials, std::uint64_t seed) {
  if (trials < 100) throw ConfigError("trials", "must be at least 100");
  const auto exact = exact_moments(dist);
  BoundInput in;
  in.m = m;
  in.n = n;
  in.delta = delta;
  in.within_var = exact.within;
  in.between_var = exact.between;
  const double eps = epsilon_single(in);
  std::size_t violations = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto sample = sample_toy_losses(dist, m, n, rng);
    double total = 0.0;
    for (const auto& losses : sample) total += mean_of(losses);
    const double ls = total / static_cast<double>(m);
    violations += std::abs(exact.mean - ls) > eps;
  }
  return static_cast<double>(violations) / static_cast<double>(trials);
}

}  // namespace rfm
