#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/stats/normal.hpp"
#include "agex/stats/rank_expectation.hpp"

namespace agex::stats {

inline constexpr std::size_t kExactPoissonBinomialMax = 5000;

// Distribution of the number of successes among independent Bernoulli(p_i)
// trials, by sequential convolution.
inline std::vector<double> poisson_binomial_pmf(std::span<const double> probs) {
  std::vector<double> pmf(probs.size() + 1, 0.0);
  pmf[0] = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probabilities must lie in [0,1]");
    for (std::size_t k = i + 1; k > 0; --k) pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
    pmf[0] *= 1.0 - p;
  }
  return pmf;
}

// P(X >= k). Exact up to kExactPoissonBinomialMax trials, normal approximation
// with continuity correction beyond.
inline double poisson_binomial_upper_tail(std::span<const double> probs, long long k) {
  const auto n = static_cast<long long>(probs.size());
  if (k < 0 || k > n) throw DomainError("observed count must lie in [0, number of pairs]");
  if (k == 0) return 1.0;
  if (probs.size() <= kExactPoissonBinomialMax) {
    const auto pmf = poisson_binomial_pmf(probs);
    double tail = 0;
    for (long long j = n; j >= k; --j) tail += pmf[static_cast<std::size_t>(j)];
    return std::min(tail, 1.0);
  }
  double mu = 0;
  double var = 0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probabilities must lie in [0,1]");
    mu += p;
    var += p * (1.0 - p);
  }
  if (var <= 0.0) return static_cast<double>(k) <= mu ? 1.0 : 0.0;
  return 1.0 - normal_cdf((static_cast<double>(k) - 0.5 - mu) / std::sqrt(var));
}

// One-sided p-value for `observed_correct` successes when each pair succeeds
// with its Gaussian-error probability.
inline double rank_success_pvalue(long long observed_correct, std::span<const double> separations, double sigma) {
  const auto probs = rank_success_probabilities(separations, sigma);
  return poisson_binomial_upper_tail(probs, observed_correct);
}

}  // namespace agex::stats
