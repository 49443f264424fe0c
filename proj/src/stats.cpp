#include "rfm/stats.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "rfm/error.hpp"

namespace rfm {

double sample_mean(std::span<const double> samples) {
  if (samples.empty()) throw DataError("no samples");
  double s = 0.0;
  for (double x : samples) s += x;
  return s / static_cast<double>(samples.size());
}

double sample_stddev(std::span<const double> samples) {
  if (samples.size() < 2) throw DataError("standard deviation needs at least two samples");
  const double mu = sample_mean(samples);
  double s = 0.0;
  for (double x : samples) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(samples.size() - 1));
}

Interval confidence_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2) throw DataError("confidence interval needs at least two samples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level", "must lie strictly between 0 and 1");
  const double mu = sample_mean(samples);
  const double sd = sample_stddev(samples);
  const boost::math::students_t dist(static_cast<double>(samples.size() - 1));
  const double t = boost::math::quantile(dist, 0.5 + 0.5 * level);
  const double hw = t * sd / std::sqrt(static_cast<double>(samples.size()));
  return {mu - hw, mu + hw};
}

}  // namespace rfm
