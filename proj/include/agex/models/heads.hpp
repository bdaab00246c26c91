#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "agex/core/error.hpp"

namespace agex {

enum class HeadType { regression, expectation, ordinal, ensemble };

inline std::string_view to_string(HeadType h) {
  switch (h) {
    case HeadType::regression:
      return "regression";
    case HeadType::expectation:
      return "expectation";
    case HeadType::ordinal:
      return "ordinal";
    case HeadType::ensemble:
      break;
  }
  return "ensemble";
}

inline HeadType parse_head(std::string_view s) {
  if (s == "regression") return HeadType::regression;
  if (s == "expectation") return HeadType::expectation;
  if (s == "ordinal") return HeadType::ordinal;
  if (s == "ensemble") return HeadType::ensemble;
  throw ConfigError("unknown head type '" + std::string(s) + "'");
}

// Integer age labels c_j = j for j in [0, 105].
struct AgeLabels {
  static constexpr int kFirst = 0;
  static constexpr int kLast = 105;
  static constexpr int kCount = kLast - kFirst + 1;
  static constexpr double value(int j) { return kFirst + j; }
};

struct AgeEstimate {
  double age_years = 0;
  HeadType head = HeadType::regression;
  int resolution = 0;
};

// Rectified single output.
inline AgeEstimate head_regression(double pre_activation, int resolution = 0) {
  return {std::max(0.0, pre_activation), HeadType::regression, resolution};
}

// Probability-weighted mean label of a softmax distribution.
inline AgeEstimate head_expectation(std::span<const double> class_probs, int resolution = 0) {
  if (class_probs.size() != AgeLabels::kCount) {
    throw DomainError("expectation head needs " + std::to_string(AgeLabels::kCount) + " probabilities");
  }
  double sum = 0;
  double mean = 0;
  for (std::size_t j = 0; j < class_probs.size(); ++j) {
    const double p = class_probs[j];
    if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("class probabilities must be finite and nonnegative");
    sum += p;
    mean += p * AgeLabels::value(static_cast<int>(j));
  }
  if (std::abs(sum - 1.0) > 1e-6) throw DomainError("class probabilities must sum to 1");
  return {std::clamp(mean, 0.0, 105.0), HeadType::expectation, resolution};
}

// Sum of per-label exceedance probabilities P(age > c_j), clamped to [0,105].
inline AgeEstimate head_ordinal(std::span<const double> exceed_probs, int resolution = 0) {
  if (exceed_probs.size() != AgeLabels::kCount) {
    throw DomainError("ordinal head needs " + std::to_string(AgeLabels::kCount) + " probabilities");
  }
  double sum = 0;
  for (double p : exceed_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("exceedance probabilities must lie in [0,1]");
    sum += p;
  }
  return {std::clamp(sum, 0.0, 105.0), HeadType::ordinal, resolution};
}

struct RankScore {
  double p_second_older = 0.5;
};

// Ranking from two independent point estimates; ties score 0.5.
inline RankScore ranking_from_estimates(const AgeEstimate& a, const AgeEstimate& b) {
  if (b.age_years > a.age_years) return {1.0};
  if (b.age_years < a.age_years) return {0.0};
  return {0.5};
}

}  // namespace agex
