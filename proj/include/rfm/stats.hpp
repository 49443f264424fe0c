#pragma once

#include <span>

namespace rfm {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double half_width() const { return 0.5 * (hi - lo); }
  double mid() const { return 0.5 * (hi + lo); }
  bool overlaps(const Interval& other) const { return lo <= other.hi && other.lo <= hi; }
};

double sample_mean(std::span<const double> samples);
// Unbiased (n - 1) standard deviation.
double sample_stddev(std::span<const double> samples);

// Two-sided Student-t interval for the mean: mean +- t_{(1+level)/2, k-1} s / sqrt(k).
Interval confidence_interval(std::span<const double> samples, double level);

}  // namespace rfm
