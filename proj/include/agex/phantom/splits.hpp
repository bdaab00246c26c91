#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/phantom/manifest.hpp"

namespace agex {

enum class SplitPart { train = 0, val = 1, test = 2 };

struct SplitSpec {
  std::set<std::string> train_ids;
  std::set<std::string> val_ids;
  std::set<std::string> test_ids;

  const std::set<std::string>& ids(SplitPart part) const {
    switch (part) {
      case SplitPart::train:
        return train_ids;
      case SplitPart::val:
        return val_ids;
      case SplitPart::test:
        break;
    }
    return test_ids;
  }
};

// Records of one split, in manifest order.
inline Manifest select(const Manifest& manifest, const SplitSpec& splits, SplitPart part) {
  const auto& ids = splits.ids(part);
  Manifest out;
  for (const auto& r : manifest) {
    if (ids.count(r.image_id)) out.push_back(r);
  }
  return out;
}

// Patient-disjoint, age-stratified split. Patients are ordered by mean age
// (random order within each one-year band) and dealt to whichever split is
// furthest below its quota, so every split sees the same age profile and
// patient counts are within one of the requested fractions.
inline SplitSpec make_splits(const Manifest& manifest, double train_frac, double val_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0)) {
    throw DomainError("split fractions must be positive and sum to less than 1");
  }
  struct Patient {
    std::string id;
    double mean_age = 0;
    std::uint64_t tiebreak = 0;
    std::vector<std::size_t> records;
  };
  std::vector<Patient> patients;
  {
    auto groups = group_by_patient(manifest);
    std::mt19937_64 rng(derive_seed(seed, 2));
    std::vector<std::string> names;
    names.reserve(groups.size());
    for (const auto& [pid, _] : groups) names.push_back(pid);
    std::sort(names.begin(), names.end());
    for (const auto& pid : names) {
      Patient p;
      p.id = pid;
      p.records = groups[pid];
      for (auto i : p.records) p.mean_age += manifest[i].age_years;
      p.mean_age /= static_cast<double>(p.records.size());
      p.tiebreak = rng();
      patients.push_back(std::move(p));
    }
  }
  const std::array<double, 3> fracs{train_frac, val_frac, 1.0 - train_frac - val_frac};
  const double n = static_cast<double>(patients.size());
  for (std::size_t s = 0; s < fracs.size(); ++s) {
    if (std::floor(fracs[s] * n + 1e-9) < 1.0) {
      throw ConfigError("too few patients (" + std::to_string(patients.size()) +
                        ") to form three non-empty stratified splits");
    }
  }
  std::sort(patients.begin(), patients.end(), [](const Patient& a, const Patient& b) {
    const auto ba = std::floor(a.mean_age);
    const auto bb = std::floor(b.mean_age);
    if (ba != bb) return ba < bb;
    return a.tiebreak < b.tiebreak;
  });

  SplitSpec out;
  std::array<double, 3> assigned{0, 0, 0};
  std::array<std::set<std::string>*, 3> dest{&out.train_ids, &out.val_ids, &out.test_ids};
  for (std::size_t i = 0; i < patients.size(); ++i) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < 3; ++s) {
      const double deficit = fracs[s] * static_cast<double>(i + 1) - assigned[s];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = s;
      }
    }
    assigned[best] += 1;
    for (auto r : patients[i].records) dest[best]->insert(manifest[r].image_id);
  }
  return out;
}

}  // namespace agex
