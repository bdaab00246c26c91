#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "agex/core/error.hpp"

namespace agex::stats {

// Standard normal CDF. erfc keeps full relative precision in the lower tail.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Probability that two independent N(0, sigma^2) age errors preserve the order
// of two scans `separation` years apart: the error difference has sd sigma*sqrt(2).
inline double rank_success_probability(double separation, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
  if (!(separation >= 0.0)) throw DomainError("separation must be >= 0");
  const double p = normal_cdf(separation / (sigma * std::sqrt(2.0)));
  // Kept strictly inside (0,1); erfc saturates to exactly 1 for huge separations.
  return std::min(p, 1.0 - std::numeric_limits<double>::epsilon() / 2);
}

}  // namespace agex::stats
