#include <gtest/gtest.h>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <random>

#include "agex/stats/bucketed.hpp"
#include "agex/stats/log_fit.hpp"
#include "agex/stats/normal.hpp"
#include "agex/stats/point_metrics.hpp"
#include "agex/stats/poisson_binomial.hpp"
#include "agex/stats/rank_expectation.hpp"
#include "agex/stats/study_summary.hpp"

using namespace agex;
using namespace agex::stats;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

double phi_oracle(double x) {
  const big v = big(0.5) * boost::math::erfc(-big(x) / boost::multiprecision::sqrt(big(2)));
  return v.convert_to<double>();
}

// Upper tail by enumerating all 2^n outcome vectors.
double brute_tail(const std::vector<double>& p, int k) {
  const int n = static_cast<int>(p.size());
  double tail = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double prob = 1;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const bool hit = (mask >> i) & 1u;
      prob *= hit ? p[i] : 1 - p[i];
      hits += hit;
    }
    if (hits >= k) tail += prob;
  }
  return tail;
}

}  // namespace

TEST(NormalCdf, MatchesHighPrecisionOracle) {
  EXPECT_EQ(normal_cdf(0.0), 0.5);
  for (double x = -8; x <= 8; x += 0.37) EXPECT_NEAR(normal_cdf(x), phi_oracle(x), 1e-15) << x;
}

TEST(RankSuccess, ZeroSeparationIsExactlyHalf) { EXPECT_EQ(rank_success_probability(0.0, 14.25), 0.5); }

TEST(RankSuccess, ReferenceSeparation) {
  const double x = 5.0 / (14.25 * std::sqrt(2.0));
  EXPECT_NEAR(x, 0.24810, 1e-5);
  EXPECT_NEAR(rank_success_probability(5.0, 14.25), phi_oracle(x), 1e-14);
  EXPECT_NEAR(rank_success_probability(5.0, 14.25), 0.5980, 1e-4);
}

TEST(RankSuccess, StrictlyIncreasingAndBelowOne) {
  double prev = 0.5;
  for (double d = 0.5; d < 20; d *= 1.5) {
    const double p = rank_success_probability(d, 3.0);
    EXPECT_GT(p, prev);
    EXPECT_LT(p, 1.0);
    prev = p;
  }
  EXPECT_NEAR(rank_success_probability(1e6, 1.0), 1.0, 1e-12);
}

TEST(RankSuccess, RejectsBadArguments) {
  EXPECT_THROW(rank_success_probability(1.0, 0.0), DomainError);
  EXPECT_THROW(rank_success_probability(-1.0, 2.0), DomainError);
}

TEST(RankExpectationTest, AttemptedWeightingBracketsReportedRate) {
  const auto d = stratified_separations(40, 2.0, 5);
  ASSERT_EQ(d.size(), 200u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GE(d[i], 2.0 * static_cast<double>(i / 40));
    EXPECT_LT(d[i], 2.0 * static_cast<double>(i / 40) + 2.0);
  }
  const auto w = attempt_weights(40, 5);
  double rate = 0;
  for (double x : w) rate += x / w.size();
  EXPECT_NEAR(rate, 0.70, 1e-12);
  const auto p = rank_success_probabilities(d, 14.25);
  const double m = weighted_mean_success(p, w);
  EXPECT_GE(m, 0.577);
  EXPECT_LE(m, 0.625);
  // Oracle: the same weighted mean evaluated in 50-digit arithmetic.
  big num = 0, den = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    num += big(w[i]) * phi_oracle(d[i] / (14.25 * std::sqrt(2.0)));
    den += big(w[i]);
  }
  EXPECT_NEAR(m, (num / den).convert_to<double>(), 1e-13);
}

TEST(RankExpectationTest, MonteCarloSdMatchesBinomialTheory) {
  const std::vector<double> d(200, 5.0);
  const auto r = expected_rank_success(d, 14.25, 20000, 3);
  const double p = rank_success_probability(5.0, 14.25);
  EXPECT_NEAR(r.mean_success, p, 1e-12);
  EXPECT_NEAR(r.mc_sd, std::sqrt(p * (1 - p) / 200), 0.002);
  EXPECT_THROW(expected_rank_success(d, 14.25, 1, 0), DomainError);
  EXPECT_THROW(expected_rank_success(std::vector<double>{}, 14.25, 10, 0), DomainError);
}

TEST(PoissonBinomial, MatchesBruteForceForSmallN) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 1; n <= 12; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> p(n);
      for (double& x : p) x = u(rng);
      for (int k = 0; k <= n; ++k) EXPECT_NEAR(poisson_binomial_upper_tail(p, k), brute_tail(p, k), 1e-12);
    }
  }
}

TEST(PoissonBinomial, Examples) {
  const std::vector<double> p{0.6, 0.7, 0.8};
  EXPECT_NEAR(poisson_binomial_upper_tail(p, 3), 0.336, 1e-15);
  EXPECT_DOUBLE_EQ(brute_tail(p, 3), 0.336);
  EXPECT_EQ(poisson_binomial_upper_tail(p, 0), 1.0);
  EXPECT_NEAR(poisson_binomial_upper_tail(std::vector<double>{0.5, 0.5}, 2), 0.25, 1e-15);
  EXPECT_THROW(poisson_binomial_upper_tail(p, 4), DomainError);
  EXPECT_THROW(poisson_binomial_upper_tail(p, -1), DomainError);
}

TEST(PoissonBinomial, TailIsMonotoneInObserved) {
  const auto d = stratified_separations(40, 2.0, 5);
  double prev = 1.0;
  for (int k = 0; k <= 200; ++k) {
    const double pv = rank_success_pvalue(k, d, 14.25);
    EXPECT_LE(pv, prev + 1e-15);
    prev = pv;
  }
}

TEST(PoissonBinomial, NormalApproximationAboveExactLimit) {
  std::vector<double> p(kExactPoissonBinomialMax + 1, 0.6);
  const double n = static_cast<double>(p.size());
  const double mean = 0.6 * n;
  const double sd = std::sqrt(n * 0.24);
  const long long k = static_cast<long long>(mean + sd);
  EXPECT_NEAR(poisson_binomial_upper_tail(p, k), 1 - normal_cdf((k - 0.5 - mean) / sd), 1e-10);
}

TEST(PointMetricsTest, Examples) {
  const std::vector<double> t{10, 20, 30};
  auto m = point_metrics(std::vector<double>{12, 18, 33}, t);
  EXPECT_NEAR(m.mae, 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.r_squared, 0.915, 1e-12);
  m = point_metrics(t, t);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.mean_error, 0.0);
  EXPECT_EQ(m.r_squared, 1.0);
  m = point_metrics(std::vector<double>{12, 22, 32}, t);
  EXPECT_NEAR(m.mae, 2.0, 1e-12);
  EXPECT_NEAR(m.mean_error, 2.0, 1e-12);
  EXPECT_NEAR(m.error_sd, 0.0, 1e-12);
}

TEST(PointMetricsTest, ConstantTruthsFlagR2) {
  const auto m = point_metrics(std::vector<double>{1, 2}, std::vector<double>{5, 5});
  EXPECT_FALSE(m.r_squared_defined);
  EXPECT_TRUE(to_json(m)["r_squared"].is_null());
}

TEST(PointMetricsTest, MaeBoundsMeanError) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 10);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(7), b(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    const auto m = point_metrics(a, b);
    EXPECT_GE(m.mae + 1e-12, std::abs(m.mean_error));
  }
  EXPECT_THROW(point_metrics(std::vector<double>{1}, std::vector<double>{1, 2}), DomainError);
}

TEST(Bucketed, HalfOpenBuckets) {
  auto c = bucketed_stats({{12.0, 5.0}}, 5.0);
  ASSERT_EQ(c.count.size(), 1u);
  EXPECT_EQ(c.bucket_edges.front(), 10.0);
  EXPECT_EQ(c.mean[0], 5.0);
  c = bucketed_stats({{4.999, 1.0}, {5.0, 2.0}}, 5.0);
  ASSERT_EQ(c.count.size(), 2u);
  EXPECT_EQ(c.count[0], 1);
  EXPECT_EQ(c.count[1], 1);
}

TEST(Bucketed, GapsHaveZeroCount) {
  const auto c = bucketed_stats({{1.0, 1.0}, {11.0, 3.0}, {12.0, 5.0}}, 5.0);
  ASSERT_EQ(c.count.size(), 3u);
  EXPECT_EQ(c.count[1], 0);
  EXPECT_EQ(c.mean[2], 4.0);
  EXPECT_NEAR(c.sd[2], 1.0, 1e-12);
}

TEST(LogFitTest, RecoversPlantedCoefficients) {
  std::vector<double> ns{100, 300, 1000, 4000, 16000};
  std::vector<double> y;
  for (double n : ns) y.push_back(10.0 - 0.8 * std::log(n));
  const auto f = log_fit(ns, y);
  EXPECT_NEAR(f.a, 10.0, 1e-9);
  EXPECT_NEAR(f.b, -0.8, 1e-9);
  EXPECT_NEAR(f.rmse, 0.0, 1e-9);
}

TEST(LogFitTest, TwoPointsInterpolateAndResidualsOrthogonal) {
  auto f = log_fit(std::vector<double>{10, 1000}, std::vector<double>{5, 3});
  EXPECT_NEAR(f.rmse, 0.0, 1e-12);
  const std::vector<double> ns{1000, 2000, 4000, 16000};
  const std::vector<double> y{6.1, 5.2, 5.3, 4.0};
  f = log_fit(ns, y);
  double r1 = 0, rl = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    r1 += y[i] - f(ns[i]);
    rl += (y[i] - f(ns[i])) * std::log(ns[i]);
  }
  EXPECT_NEAR(r1, 0.0, 1e-8);
  EXPECT_NEAR(rl, 0.0, 1e-8);
}

TEST(LogFitTest, EqualSizesAreSingular) {
  EXPECT_THROW(log_fit(std::vector<double>{5, 5}, std::vector<double>{1, 2}), SingularFitError);
}

namespace {

study::StudyPair make_pair(std::string id, double a, double b) {
  study::StudyPair p;
  p.pair_id = std::move(id);
  p.patient_id = "P";
  p.image_a_id = p.pair_id + "a";
  p.image_b_id = p.pair_id + "b";
  p.true_age_a = a;
  p.true_age_b = b;
  p.separation_bucket = static_cast<int>((b - a) / 2);
  return p;
}

study::ResponseRow answer(const study::StudyPair& p, study::Choice c) {
  study::ResponseRow r;
  r.response.session_id = "s";
  r.response.pair_id = p.pair_id;
  r.response.choice = c;
  r.participant_id = "u";
  r.first_image_id = p.image_a_id;
  r.second_image_id = p.image_b_id;
  return r;
}

}  // namespace

TEST(StudySummaryTest, AllPairsVersusAttempted) {
  std::vector<study::StudyPair> truths{make_pair("q1", 40, 41), make_pair("q2", 40, 43), make_pair("q3", 40, 45),
                                      make_pair("q4", 40, 47)};
  std::vector<study::ResponseRow> rows{answer(truths[0], study::Choice::second_older),
                                       answer(truths[1], study::Choice::second_older),
                                       answer(truths[2], study::Choice::first_older),
                                       answer(truths[3], study::Choice::not_sure)};
  const auto s = study_summary(rows, truths, {});
  EXPECT_DOUBLE_EQ(s.success_all, 0.5);
  ASSERT_TRUE(s.success_attempted);
  EXPECT_NEAR(*s.success_attempted, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.attempted_rate, 0.75);
}

TEST(StudySummaryTest, AllNotSureFlagsAttemptedUndefined) {
  std::vector<study::StudyPair> truths{make_pair("q1", 40, 41)};
  const auto s = study_summary({answer(truths[0], study::Choice::not_sure)}, truths, {});
  EXPECT_EQ(s.success_all, 0.0);
  EXPECT_FALSE(s.success_attempted);
  EXPECT_TRUE(to_json(s).at("success_attempted_undefined").get<bool>());
}

TEST(StudySummaryTest, SwappedPresentationIsScoredBySide) {
  std::vector<study::StudyPair> truths{make_pair("q1", 40, 45)};
  auto r = answer(truths[0], study::Choice::first_older);
  std::swap(r.first_image_id, r.second_image_id);
  EXPECT_DOUBLE_EQ(study_summary({r}, truths, {}).success_all, 1.0);
}

TEST(StudySummaryTest, UnknownPairIsAnError) {
  std::vector<study::StudyPair> truths{make_pair("q1", 40, 45)};
  auto r = answer(truths[0], study::Choice::first_older);
  r.response.pair_id = "zz";
  EXPECT_THROW(study_summary({r}, truths, {}), DomainError);
}
