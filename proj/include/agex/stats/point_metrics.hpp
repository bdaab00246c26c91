#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "json.hpp"

#include "agex/core/error.hpp"

namespace agex::stats {

struct PointMetrics {
  std::size_t n = 0;
  double mae = 0;
  double mean_error = 0;  // prediction - truth
  double error_sd = 0;    // population sd
  // NaN and flagged when the truths are constant.
  double r_squared = 0;
  bool r_squared_defined = true;
};

inline PointMetrics point_metrics(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw DomainError("predictions and truths differ in length");
  if (predictions.empty()) throw DomainError("point_metrics needs at least one sample");
  const double n = static_cast<double>(truths.size());
  PointMetrics m;
  m.n = truths.size();
  double truth_mean = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double e = predictions[i] - truths[i];
    m.mae += std::abs(e);
    m.mean_error += e;
    truth_mean += truths[i];
  }
  m.mae /= n;
  m.mean_error /= n;
  truth_mean /= n;
  double ss_res = 0;
  double ss_tot = 0;
  double var = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double e = predictions[i] - truths[i];
    ss_res += e * e;
    var += (e - m.mean_error) * (e - m.mean_error);
    ss_tot += (truths[i] - truth_mean) * (truths[i] - truth_mean);
  }
  m.error_sd = std::sqrt(var / n);
  if (ss_tot > 0.0) {
    m.r_squared = 1.0 - ss_res / ss_tot;
  } else {
    m.r_squared = std::nan("");
    m.r_squared_defined = false;
  }
  return m;
}

inline nlohmann::json to_json(const PointMetrics& m) {
  nlohmann::json j = {{"n", m.n}, {"mae", m.mae}, {"mean_error", m.mean_error}, {"error_sd", m.error_sd}};
  if (m.r_squared_defined) {
    j["r_squared"] = m.r_squared;
  } else {
    j["r_squared"] = nullptr;
    j["r_squared_undefined"] = true;
  }
  return j;
}

}  // namespace agex::stats
