#include <doctest.h>

#include <cmath>
#include <vector>

#include "rfm/error.hpp"
#include "rfm/stats.hpp"

using namespace rfm;

TEST_CASE("mean and standard deviation") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(sample_mean(v) == 5.0);
  CHECK(sample_stddev(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK_THROWS_AS(sample_mean(std::vector<double>{}), DataError);
  CHECK_THROWS_AS(sample_stddev(std::vector<double>{1.0}), DataError);
}

TEST_CASE("t intervals against reference quantiles") {
  const std::vector<double> a{0.71, 0.69, 0.73, 0.70, 0.72};
  const auto ia = confidence_interval(a, 0.99);
  CHECK(ia.lo == doctest::Approx(0.67744413295242215).epsilon(1e-12));
  CHECK(ia.hi == doctest::Approx(0.74255586704757785).epsilon(1e-12));
  // t_{0.995, 4} recovered from the half-width.
  CHECK(ia.half_width() / (sample_stddev(a) / std::sqrt(5.0)) == doctest::Approx(4.6040948713499932).epsilon(1e-12));

  const std::vector<double> b{0.55, 0.61, 0.58, 0.66, 0.52};
  const auto ib = confidence_interval(b, 0.99);
  CHECK(ib.lo == doctest::Approx(0.47254666404071474).epsilon(1e-12));
  CHECK(ib.hi == doctest::Approx(0.69545333595928526).epsilon(1e-12));
  CHECK(ia.overlaps(ib));
  CHECK(ib.mid() == doctest::Approx(0.584));
}

TEST_CASE("interval edge cases") {
  const std::vector<double> flat(10, 0.8);
  const auto i = confidence_interval(flat, 0.95);
  CHECK(i.lo == doctest::Approx(0.8));
  CHECK(i.hi == doctest::Approx(0.8));
  CHECK_THROWS_AS(confidence_interval(std::vector<double>{0.5}, 0.95), DataError);
  CHECK_THROWS_AS(confidence_interval(flat, 1.0), ConfigError);
  CHECK_THROWS_AS(confidence_interval(flat, 0.0), ConfigError);
  const std::vector<double> v{0.1, 0.4, 0.35, 0.2};
  CHECK(confidence_interval(v, 0.99).half_width() > confidence_interval(v, 0.9).half_width());
  CHECK_FALSE(Interval{0, 1}.overlaps(Interval{1.5, 2}));
}
