#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/phantom/splits.hpp"

namespace agex {

struct PairSample {
  std::string image_id_a;
  std::string image_id_b;
  int label = 0;  // 1 iff age_b > age_a
  bool same_patient = false;
  double separation_years = 0;
};

struct PairSampleSet {
  std::vector<PairSample> pairs;
  // Set when there were too few multi-scan patients for the requested
  // same-patient share and cross-patient pairs filled the gap.
  bool fell_back_to_cross_patient = false;
};

// Draws `n_pairs` pairs from one split: round(n * same_patient_fraction)
// longitudinal pairs (two scans of one patient) and the rest cross-patient.
// Argument order is random; exact age ties are never emitted.
inline PairSampleSet sample_pairs(const Manifest& manifest, const SplitSpec& splits, SplitPart part, int n_pairs,
                                  double same_patient_fraction, std::uint64_t seed) {
  if (n_pairs < 1) throw DomainError("n_pairs must be >= 1");
  if (!(same_patient_fraction >= 0.0 && same_patient_fraction <= 1.0)) {
    throw DomainError("same_patient_fraction must lie in [0,1]");
  }
  const Manifest records = select(manifest, splits, part);
  if (records.size() < 2) throw ConfigError("split has fewer than two images");

  std::vector<std::vector<std::size_t>> multi;
  {
    auto groups = group_by_patient(records);
    std::vector<std::string> names;
    for (const auto& [pid, idx] : groups) {
      if (idx.size() >= 2) names.push_back(pid);
    }
    std::sort(names.begin(), names.end());
    for (const auto& pid : names) multi.push_back(groups[pid]);
  }

  std::mt19937_64 rng(derive_seed(seed, 0x9a125));
  PairSampleSet out;
  int want_same = static_cast<int>(std::lround(n_pairs * same_patient_fraction));
  if (want_same > 0 && multi.empty()) {
    out.fell_back_to_cross_patient = true;
    want_same = 0;
  }

  auto emit = [&](std::size_t i, std::size_t j, bool same) {
    if (rng() & 1) std::swap(i, j);
    const auto& a = records[i];
    const auto& b = records[j];
    out.pairs.push_back({a.image_id, b.image_id, b.age_years > a.age_years ? 1 : 0, same,
                         std::abs(b.age_years - a.age_years)});
  };

  int attempts = 0;
  while (static_cast<int>(out.pairs.size()) < want_same) {
    if (++attempts > 100 * n_pairs) {
      out.fell_back_to_cross_patient = true;
      break;
    }
    const auto& scans = multi[rng() % multi.size()];
    const std::size_t i = scans[rng() % scans.size()];
    const std::size_t j = scans[rng() % scans.size()];
    if (i == j || records[i].age_years == records[j].age_years) continue;
    emit(i, j, true);
  }
  attempts = 0;
  while (static_cast<int>(out.pairs.size()) < n_pairs) {
    if (++attempts > 100 * n_pairs) throw ConfigError("could not draw distinct-age cross-patient pairs");
    const std::size_t i = rng() % records.size();
    const std::size_t j = rng() % records.size();
    if (records[i].patient_id == records[j].patient_id || records[i].age_years == records[j].age_years) continue;
    emit(i, j, false);
  }
  std::shuffle(out.pairs.begin(), out.pairs.end(), rng);
  return out;
}

}  // namespace agex
