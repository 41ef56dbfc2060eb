#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "haldane/errors.hpp"

namespace haldane {

/// Welford accumulator for a mean and its standard error.
class RunningStats {
 public:
  void add(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  std::uint64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  double std_error() const {
    return count_ > 0 ? std::sqrt(variance() / static_cast<double>(count_))
                      : 0.0;
  }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Two-sided standard normal quantile for a confidence level in (0,1).
inline double normal_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("confidence level must lie in (0,1)");
  }
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + 0.5 * level);
}

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                                double level = 0.99) {
  if (trials == 0) throw DomainError("wilson_interval: trials must be >= 1");
  if (successes > trials) {
    throw DomainError("wilson_interval: successes exceed trials");
  }
  const double z = normal_quantile(level);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Interval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (successes == 0) ci.low = 0.0;
  if (successes == trials) ci.high = 1.0;
  // rounding can push the bounds past the point estimate by an ulp
  ci.low = std::min(ci.low, p);
  ci.high = std::max(ci.high, p);
  return ci;
}

}  // namespace haldane
