#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/stats/normal.hpp"

namespace agex::stats {

struct RankExpectation {
  std::vector<double> per_pair_success_prob;
  double mean_success = 0;
  // Sd of the success rate over Monte Carlo resamples of the pair outcomes.
  double mc_sd = 0;
};

inline std::vector<double> rank_success_probabilities(std::span<const double> separations, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
  std::vector<double> p;
  p.reserve(separations.size());
  for (double d : separations) p.push_back(rank_success_probability(d, sigma));
  return p;
}

inline RankExpectation expected_rank_success(std::span<const double> separations, double sigma, int mc_runs,
                                             std::uint64_t seed) {
  if (separations.empty()) throw DomainError("expected_rank_success needs at least one pair");
  if (mc_runs < 2) throw DomainError("mc_runs must be >= 2");
  RankExpectation r;
  r.per_pair_success_prob = rank_success_probabilities(separations, sigma);
  const double n = static_cast<double>(separations.size());
  for (double p : r.per_pair_success_prob) r.mean_success += p;
  r.mean_success /= n;

  std::mt19937_64 rng(derive_seed(seed, 0x3c));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double s = 0;
  double s2 = 0;
  for (int run = 0; run < mc_runs; ++run) {
    int hits = 0;
    for (double p : r.per_pair_success_prob) hits += unif(rng) < p ? 1 : 0;
    const double rate = hits / n;
    s += rate;
    s2 += rate * rate;
  }
  const double m = s / mc_runs;
  r.mc_sd = std::sqrt(std::max(0.0, s2 / mc_runs - m * m));
  return r;
}

// Separations of a bucketed study design with pairs spread evenly inside each
// bucket: bucket b holds separations w·(b + (k + 0.5)/n) for k < n.
inline std::vector<double> stratified_separations(int pairs_per_bucket, double bucket_width, int n_buckets) {
  if (pairs_per_bucket < 1 || n_buckets < 1 || !(bucket_width > 0.0)) throw DomainError("bad study design");
  std::vector<double> d;
  for (int b = 0; b < n_buckets; ++b) {
    for (int k = 0; k < pairs_per_bucket; ++k) d.push_back(bucket_width * (b + (k + 0.5) / pairs_per_bucket));
  }
  return d;
}

// Attempt rates rising linearly across buckets from `lo` to `hi`; readers
// skip close calls more often. 0.55..0.85 over five buckets averages 0.70.
inline std::vector<double> attempt_weights(int pairs_per_bucket, int n_buckets, double lo = 0.55, double hi = 0.85) {
  if (pairs_per_bucket < 1 || n_buckets < 1) throw DomainError("bad study design");
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw DomainError("attempt rates must satisfy 0 <= lo <= hi <= 1");
  std::vector<double> w;
  for (int b = 0; b < n_buckets; ++b) {
    const double r = n_buckets == 1 ? lo : lo + (hi - lo) * b / (n_buckets - 1);
    w.insert(w.end(), pairs_per_bucket, r);
  }
  return w;
}

// Success expected over the attempted pairs when pair i is attempted with
// probability weights[i].
inline double weighted_mean_success(std::span<const double> probs, std::span<const double> weights) {
  if (probs.size() != weights.size() || probs.empty()) throw DomainError("probs and weights differ in length");
  double num = 0;
  double den = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    num += weights[i] * probs[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw DomainError("weights sum to zero");
  return num / den;
}

inline nlohmann::json to_json(const RankExpectation& r) {
  return {{"mean_success", r.mean_success}, {"mc_sd", r.mc_sd}, {"n_pairs", r.per_pair_success_prob.size()}};
}

}  // namespace agex::stats
