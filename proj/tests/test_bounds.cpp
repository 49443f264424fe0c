#include <doctest.h>

#include <cmath>

#include "rfm/bounds.hpp"
#include "rfm/error.hpp"
#include "test_util.hpp"

using namespace rfm;

namespace {

BoundInput input(std::size_t m, std::size_t n, double delta, double within, double between) {
  BoundInput b;
  b.m = m;
  b.n = n;
  b.delta = delta;
  b.within_var = within;
  b.between_var = between;
  return b;
}

}  // namespace

TEST_CASE("epsilon reference values") {
  // 50-digit reference evaluations.
  CHECK(epsilon_single(input(100, 10, 0.05, 0.04, 0.01)) == doctest::Approx(0.04670679196216941533).epsilon(1e-12));
  auto r = input(400, 5, 0.1, 0.02, 0.005);
  r.weight_norm = 1.0;
  CHECK(rademacher_excess_bound(r) == doctest::Approx(0.33202705764386260643).epsilon(1e-12));
}

TEST_CASE("epsilon shape") {
  const auto base = input(200, 10, 0.05, 0.05, 0.02);
  SUBCASE("zero variance leaves 2g/3m") {
    CHECK(epsilon_single(input(50, 3, 0.05, 0, 0)) == doctest::Approx(2.0 * std::log(40.0) / 150.0));
  }
  SUBCASE("monotone in n towards the limit") {
    double prev = 1e9;
    for (std::size_t n : {1, 2, 5, 10, 100, 10000}) {
      auto b = base;
      b.n = n;
      const double e = epsilon_single(b);
      CHECK(e < prev);
      CHECK(e > epsilon_limit_n(base));
      prev = e;
    }
    auto huge = base;
    huge.n = 100000000;
    CHECK(epsilon_single(huge) == doctest::Approx(epsilon_limit_n(base)).epsilon(1e-6));
  }
  SUBCASE("decreasing in m, increasing in variance and confidence") {
    auto b = base;
    b.m = 400;
    CHECK(epsilon_single(b) < epsilon_single(base));
    b = base;
    b.between_var = 0.04;
    CHECK(epsilon_single(b) > epsilon_single(base));
    b = base;
    b.delta = 0.01;
    CHECK(epsilon_single(b) > epsilon_single(base));
  }
  SUBCASE("large-m rate approaches 1/sqrt(m)") {
    auto a = base, b = base;
    a.m = 1000000;
    b.m = 4000000;
    CHECK(epsilon_single(a) / epsilon_single(b) == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("uniform bound and covering") {
  auto b = input(500, 10, 0.05, 0.05, 0.02);
  CHECK_THROWS_AS(epsilon_uniform(b), ConfigError);
  b.cover = {{1.0, 0.0}};
  CHECK(epsilon_uniform(b) == doctest::Approx(2.0 * (epsilon_single(b) + 2.0)));
  b.cover = {{0.5, covering_number_bound(0.5, 3, 2)}, {0.05, covering_number_bound(0.05, 3, 2)}};
  const double g = std::log(2.0 / 0.05) + 6.0 * std::log(20.0);
  const double direct = epsilon_with_g(g, 500, 10, 0.05, 0.02) + 0.1;
  const double coarse = epsilon_with_g(std::log(40.0) + 6.0 * std::log(2.0), 500, 10, 0.05, 0.02) + 1.0;
  CHECK(epsilon_uniform(b) == doctest::Approx(2.0 * std::min(direct, coarse)));

  CHECK(covering_number_bound(1.0, 4, 4) == 0.0);
  CHECK(covering_number_bound(0.1, 2, 3) == doctest::Approx(6.0 * std::log(10.0)));
  CHECK_THROWS_AS(covering_number_bound(0.0, 1, 1), ConfigError);

  for (double alpha : {1.0, 0.5, 0.3, 0.1, 0.07, 0.01}) {
    const auto grid = covering_grid(alpha);
    CHECK(static_cast<double>(grid.size()) <= std::ceil(1.0 / (2.0 * alpha)) + 1e-9);
    for (int i = 0; i <= 1000; ++i) {
      const double x = i / 1000.0;
      double best = 1.0;
      for (double c : grid) best = std::min(best, std::abs(x - c));
      CHECK(best <= alpha + 1e-12);
    }
  }
}

TEST_CASE("bound input validation") {
  CHECK_THROWS_AS(epsilon_single(input(0, 1, 0.05, 0, 0)), ConfigError);
  CHECK_THROWS_AS(epsilon_single(input(1, 0, 0.05, 0, 0)), ConfigError);
  CHECK_THROWS_AS(epsilon_single(input(1, 1, 0.0, 0, 0)), ConfigError);
  CHECK_THROWS_AS(epsilon_single(input(1, 1, 0.05, -1, 0)), ConfigError);
  CHECK_THROWS_AS(rademacher_excess_bound(input(1, 1, 0.05, 0, 0)), ConfigError);
}

TEST_CASE("variance decomposition estimator") {
  const std::vector<std::vector<double>> losses{{0, 1, 0, 1}, {1, 1, 1, 0}, {0, 0, 0, 1}};
  const auto v = variance_decomposition(losses);
  // Per-rater variances 1/3, 1/4, 1/4; means 1/2, 3/4, 1/4.
  CHECK(v.within == doctest::Approx((1.0 / 3 + 0.25 + 0.25) / 3));
  CHECK(v.between == doctest::Approx(0.0625));
  CHECK_THROWS_AS(variance_decomposition(std::vector<std::vector<double>>{{1, 2}}), DataError);
  CHECK_THROWS_AS(variance_decomposition(std::vector<std::vector<double>>{{1, 2}, {1}}), DataError);
}

TEST_CASE("toy distributions: exact moments") {
  struct Case {
    const char* file;
    double mean, within, between;
  };
  // Rational-arithmetic reference values.
  const Case cases[] = {{"three_users.json", 0.385, 0.078175, 0.0151},
                        {"two_users_split.json", 0.25, 0.0363, 0.063075},
                        {"four_users_wide.json", 0.55, 0.056675, 0.0345125}};
  for (const auto& c : cases) {
    CAPTURE(c.file);
    const auto d = load_toy_distribution(test::data_dir() / "toys" / c.file);
    const auto m = exact_moments(d);
    CHECK(m.mean == doctest::Approx(c.mean).epsilon(1e-12));
    CHECK(m.within == doctest::Approx(c.within).epsilon(1e-12));
    CHECK(m.between == doctest::Approx(c.between).epsilon(1e-12));
    for (std::size_t n : {1, 2, 5, 9}) {
      CAPTURE(n);
      CHECK(exact_mean_loss_variance(d, n) == doctest::Approx(m.within / n + m.between).epsilon(1e-10));
    }
  }
}

TEST_CASE("toy distributions: coverage and sampling") {
  const auto d = load_toy_distribution(test::data_dir() / "toys" / "three_users.json");
  for (std::size_t m : {20, 100}) {
    CAPTURE(m);
    const double violations = monte_carlo_coverage(d, m, 5, 0.1, 4000, 17);
    CHECK(violations <= 0.1);
  }
  CHECK(monte_carlo_coverage(d, 30, 4, 0.1, 500, 3) == monte_carlo_coverage(d, 30, 4, 0.1, 500, 3));
  CHECK_THROWS_AS(monte_carlo_coverage(d, 30, 4, 0.1, 10, 3), ConfigError);

  Rng rng(8);
  const auto losses = sample_toy_losses(d, 4000, 6, rng);
  const auto v = variance_decomposition(losses);
  const auto exact = exact_moments(d);
  CHECK(v.within == doctest::Approx(exact.within).epsilon(0.05));
  CHECK(v.between == doctest::Approx(exact.between).epsilon(0.15));
}

TEST_CASE("toy validation") {
  CHECK_THROWS_AS(toy_from_json(R"({"users":[]})"), DataError);
  CHECK_THROWS_AS(toy_from_json(R"({"users":[{"weight":1,"outcomes":[{"loss":0.5,"p":0.5}]}]})"), DataError);
  CHECK_THROWS_AS(toy_from_json(R"({"users":[{"weight":0.5,"outcomes":[{"loss":0.5,"p":1}]}]})"), DataError);
  CHECK_THROWS_AS(toy_from_json(R"({"users":[{"weight":1,"outcomes":[{"loss":1.5,"p":1}]}]})"), DataError);
  CHECK_THROWS_AS(toy_from_json("not json"), DataError);
  CHECK_NOTHROW(toy_from_json(R"({"users":[{"weight":1,"outcomes":[{"loss":0.2,"p":1}]}]})"));
}
