#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/stats/bucketed.hpp"
#include "agex/stats/point_metrics.hpp"
#include "agex/stats/poisson_binomial.hpp"
#include "agex/stats/rank_expectation.hpp"
#include "agex/study/types.hpp"

namespace agex::stats {

struct SummaryOptions {
  // When set, the attempted pairs are compared with the Gaussian-error
  // expectation at this sigma.
  std::optional<double> sigma_years;
  double separation_bucket_width = 2.0;
  int mc_runs = 2000;
  std::uint64_t seed = 0;
};

struct BucketAccuracy {
  double lo = 0;
  double hi = 0;
  int n = 0;
  int attempted = 0;
  int correct = 0;
};

struct StudySummary {
  int n_responses = 0;
  int n_attempted = 0;
  int n_correct = 0;
  double success_all = 0;
  std::optional<double> success_attempted;  // empty when nothing was attempted
  double attempted_rate = 0;
  std::vector<BucketAccuracy> buckets;
  std::optional<PointMetrics> age_estimates;
  std::optional<RankExpectation> expected;
  std::optional<double> sigma_years;
  std::optional<double> p_value;
};

namespace detail {

inline bool response_correct(const study::ResponseRow& row, const study::StudyPair& p) {
  double first_age = 0;
  double second_age = 0;
  if (row.first_image_id == p.image_a_id && row.second_image_id == p.image_b_id) {
    first_age = p.true_age_a;
    second_age = p.true_age_b;
  } else if (row.first_image_id == p.image_b_id && row.second_image_id == p.image_a_id) {
    first_age = p.true_age_b;
    second_age = p.true_age_a;
  } else {
    throw DomainError("response for pair " + p.pair_id + " shows images that do not belong to it");
  }
  switch (row.response.choice) {
    case study::Choice::first_older:
      return first_age > second_age;
    case study::Choice::second_older:
      return second_age > first_age;
    case study::Choice::not_sure:
      break;
  }
  return false;
}

inline double estimated_truth(const study::ResponseRow& row, const study::StudyPair& p) {
  const std::string& id = *row.response.estimated_image == study::Side::first ? row.first_image_id : row.second_image_id;
  return id == p.image_a_id ? p.true_age_a : p.true_age_b;
}

}  // namespace detail

// Not-sure answers count as failures on all pairs and are excluded from the
// attempted subset.
inline StudySummary study_summary(const std::vector<study::ResponseRow>& responses,
                                  const std::vector<study::StudyPair>& truths, const SummaryOptions& options = {}) {
  if (!(options.separation_bucket_width > 0.0)) throw DomainError("bucket width must be > 0");
  std::unordered_map<std::string, const study::StudyPair*> by_id;
  for (const auto& p : truths) by_id.emplace(p.pair_id, &p);

  StudySummary s;
  std::map<long long, BucketAccuracy> buckets;
  std::vector<double> attempted_separations;
  std::vector<double> est;
  std::vector<double> est_truth;
  for (const auto& row : responses) {
    auto it = by_id.find(row.response.pair_id);
    if (it == by_id.end()) throw DomainError("response references unknown pair " + row.response.pair_id);
    const study::StudyPair& p = *it->second;
    const bool attempted = row.response.choice != study::Choice::not_sure;
    const bool correct = detail::response_correct(row, p);
    const double sep = p.separation_years();
    const auto k = static_cast<long long>(std::floor(sep / options.separation_bucket_width));
    BucketAccuracy& b = buckets[k];
    b.lo = static_cast<double>(k) * options.separation_bucket_width;
    b.hi = b.lo + options.separation_bucket_width;
    ++s.n_responses;
    ++b.n;
    if (attempted) {
      ++s.n_attempted;
      ++b.attempted;
      attempted_separations.push_back(sep);
    }
    if (correct) {
      ++s.n_correct;
      ++b.correct;
    }
    if (row.response.age_estimate_years) {
      est.push_back(*row.response.age_estimate_years);
      est_truth.push_back(detail::estimated_truth(row, p));
    }
  }
  for (auto& [k, b] : buckets) s.buckets.push_back(b);
  if (s.n_responses > 0) {
    s.success_all = static_cast<double>(s.n_correct) / s.n_responses;
    s.attempted_rate = static_cast<double>(s.n_attempted) / s.n_responses;
  }
  if (s.n_attempted > 0) s.success_attempted = static_cast<double>(s.n_correct) / s.n_attempted;
  if (!est.empty()) s.age_estimates = point_metrics(est, est_truth);
  if (options.sigma_years && !attempted_separations.empty()) {
    s.sigma_years = options.sigma_years;
    s.expected = expected_rank_success(attempted_separations, *options.sigma_years, options.mc_runs, options.seed);
    s.p_value = rank_success_pvalue(s.n_correct, attempted_separations, *options.sigma_years);
  }
  return s;
}

inline nlohmann::json to_json(const StudySummary& s) {
  nlohmann::json j = {{"n_responses", s.n_responses},       {"n_attempted", s.n_attempted},
                      {"n_correct", s.n_correct},           {"success_all", s.success_all},
                      {"attempted_rate", s.attempted_rate}, {"success_attempted", nullptr}};
  if (s.success_attempted) {
    j["success_attempted"] = *s.success_attempted;
  } else {
    j["success_attempted_undefined"] = true;
  }
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : s.buckets) {
    nlohmann::json e = {{"separation_lo", b.lo}, {"separation_hi", b.hi},   {"n", b.n},
                        {"attempted", b.attempted}, {"correct", b.correct}, {"success_all", double(b.correct) / b.n},
                        {"success_attempted", nullptr}};
    if (b.attempted) e["success_attempted"] = static_cast<double>(b.correct) / b.attempted;
    buckets.push_back(std::move(e));
  }
  j["separation_buckets"] = std::move(buckets);
  j["age_estimates"] = s.age_estimates ? to_json(*s.age_estimates) : nlohmann::json(nullptr);
  if (s.expected) {
    j["expected"] = to_json(*s.expected);
    j["expected"]["sigma_years"] = *s.sigma_years;
    j["expected"]["p_value"] = *s.p_value;
  } else {
    j["expected"] = nullptr;
  }
  return j;
}

inline std::string buckets_to_csv(const StudySummary& s) {
  std::ostringstream os;
  os << "separation_lo,separation_hi,n,attempted,correct\n";
  for (const auto& b : s.buckets) csv::write_row(os, study::fmt_real(b.lo), study::fmt_real(b.hi), b.n, b.attempted, b.correct);
  return os.str();
}

}  // namespace agex::stats
