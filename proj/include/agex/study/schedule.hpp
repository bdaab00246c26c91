#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/study/types.hpp"

namespace agex::study {

struct StudyOptions {
  int pairs_per_bucket = 40;
  double bucket_width_years = 2.0;
  int n_buckets = 5;
  std::uint64_t seed = 0;
  // Derived from the options when empty.
  std::string study_id;
};

inline std::string hex64(std::uint64_t v, int digits = 16) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf + 16 - digits);
}

inline std::string default_study_id(const StudyOptions& o) {
  const std::string key = std::to_string(o.pairs_per_bucket) + "/" + std::to_string(o.bucket_width_years) + "/" +
                          std::to_string(o.n_buckets) + "/" + std::to_string(o.seed);
  return "S" + hex64(fnv1a64(key), 10);
}

namespace detail {

// Patient-to-bucket assignment with per-bucket capacity, by augmenting paths.
// candidates[p] lists the buckets patient p can fill.
class BucketMatcher {
 public:
  BucketMatcher(const std::vector<std::vector<int>>& candidates, int n_buckets, int capacity)
      : cand_(candidates), capacity_(capacity), members_(n_buckets), assigned_(candidates.size(), -1) {}

  void run(const std::vector<std::size_t>& order) {
    for (std::size_t p : order) {
      if (full()) break;
      seen_.assign(members_.size(), 0);
      augment(p);
    }
  }

  bool full() const {
    for (const auto& m : members_) {
      if (static_cast<int>(m.size()) < capacity_) return false;
    }
    return true;
  }

  const std::vector<std::vector<std::size_t>>& members() const { return members_; }

 private:
  bool augment(std::size_t p) {
    for (int b : cand_[p]) {
      if (seen_[b]) continue;
      seen_[b] = 1;
      if (static_cast<int>(members_[b].size()) < capacity_) {
        place(p, b);
        return true;
      }
      for (std::size_t k = 0; k < members_[b].size(); ++k) {
        const std::size_t q = members_[b][k];
        if (augment(q)) {
          // q moved elsewhere; p takes its slot.
          members_[b].erase(std::find(members_[b].begin(), members_[b].end(), q));
          place(p, b);
          return true;
        }
      }
    }
    return false;
  }

  void place(std::size_t p, int b) {
    members_[b].push_back(p);
    assigned_[p] = b;
  }

  const std::vector<std::vector<int>>& cand_;
  int capacity_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<int> assigned_;
  std::vector<char> seen_;
};

}  // namespace detail

// Schedules same-patient scan pairs into separation buckets
// [k*w, (k+1)*w), k < n_buckets, each filled with exactly pairs_per_bucket
// pairs from distinct patients. Deterministic given the manifest and seed.
inline StudyDefinition create_study(const Manifest& manifest, const StudyOptions& opt) {
  if (opt.pairs_per_bucket < 1) throw ConfigError("pairs_per_bucket must be >= 1");
  if (opt.n_buckets < 1) throw ConfigError("n_buckets must be >= 1");
  if (!(opt.bucket_width_years > 0.0)) throw ConfigError("bucket_width_years must be > 0");

  struct Candidate {
    std::size_t a;
    std::size_t b;
    int bucket;
  };
  auto groups = group_by_patient(manifest);
  std::vector<std::string> patients;
  for (const auto& [pid, idx] : groups) {
    if (idx.size() >= 2) patients.push_back(pid);
  }
  std::sort(patients.begin(), patients.end());

  std::vector<std::vector<Candidate>> pairs_of(patients.size());
  std::vector<std::vector<int>> buckets_of(patients.size());
  for (std::size_t p = 0; p < patients.size(); ++p) {
    auto idx = groups[patients[p]];
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return manifest[x].age_years < manifest[y].age_years;
    });
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        const double sep = manifest[idx[j]].age_years - manifest[idx[i]].age_years;
        const auto k = static_cast<int>(std::floor(sep / opt.bucket_width_years));
        if (sep <= 0.0 || k >= opt.n_buckets) continue;
        pairs_of[p].push_back({idx[i], idx[j], k});
        if (std::find(buckets_of[p].begin(), buckets_of[p].end(), k) == buckets_of[p].end()) {
          buckets_of[p].push_back(k);
        }
      }
    }
  }

  std::mt19937_64 rng(derive_seed(opt.seed, 0x57d));
  std::vector<std::size_t> order(patients.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  // Random bucket preference per patient; the augmenting paths make the
  // assignment maximum whatever the order.
  for (auto& b : buckets_of) std::shuffle(b.begin(), b.end(), rng);

  detail::BucketMatcher matcher(buckets_of, opt.n_buckets, opt.pairs_per_bucket);
  matcher.run(order);
  for (int k = 0; k < opt.n_buckets; ++k) {
    const auto have = matcher.members()[k].size();
    if (static_cast<int>(have) < opt.pairs_per_bucket) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "insufficient longitudinal data: separation bucket %d [%g, %g) years can be filled with only %zu "
                    "of %d pairs from distinct patients",
                    k, k * opt.bucket_width_years, (k + 1) * opt.bucket_width_years, have, opt.pairs_per_bucket);
      throw ConfigError(buf);
    }
  }

  StudyDefinition def;
  def.study_id = opt.study_id.empty() ? default_study_id(opt) : opt.study_id;
  def.seed = opt.seed;
  def.pairs_per_bucket = opt.pairs_per_bucket;
  def.bucket_width_years = opt.bucket_width_years;
  def.n_buckets = opt.n_buckets;
  for (int k = 0; k < opt.n_buckets; ++k) {
    auto members = matcher.members()[k];
    std::sort(members.begin(), members.end());
    for (std::size_t p : members) {
      std::vector<Candidate> in_bucket;
      for (const auto& c : pairs_of[p]) {
        if (c.bucket == k) in_bucket.push_back(c);
      }
      const Candidate& c = in_bucket[rng() % in_bucket.size()];
      StudyPair sp;
      sp.patient_id = patients[p];
      sp.image_a_id = manifest[c.a].image_id;
      sp.image_b_id = manifest[c.b].image_id;
      sp.true_age_a = manifest[c.a].age_years;
      sp.true_age_b = manifest[c.b].age_years;
      sp.separation_bucket = k;
      def.pairs.push_back(std::move(sp));
    }
  }
  // Opaque pair ids: nothing about bucket or patient can be read from them.
  std::shuffle(def.pairs.begin(), def.pairs.end(), rng);
  for (std::size_t i = 0; i < def.pairs.size(); ++i) {
    def.pairs[i].pair_id = "q" + hex64(derive_seed(fnv1a64(def.study_id), i), 12);
  }
  return def;
}

inline nlohmann::json to_json(const StudyDefinition& d) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : d.pairs) pairs.push_back(to_json(p));
  return {{"study_id", d.study_id},
          {"seed", d.seed},
          {"pairs_per_bucket", d.pairs_per_bucket},
          {"bucket_width_years", d.bucket_width_years},
          {"n_buckets", d.n_buckets},
          {"pairs", std::move(pairs)}};
}

inline StudyDefinition study_from_json(const nlohmann::json& j) {
  StudyDefinition d;
  d.study_id = j.at("study_id").get<std::string>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.pairs_per_bucket = j.at("pairs_per_bucket").get<int>();
  d.bucket_width_years = j.at("bucket_width_years").get<double>();
  d.n_buckets = j.at("n_buckets").get<int>();
  for (const auto& p : j.at("pairs")) d.pairs.push_back(pair_from_json(p));
  return d;
}

}  // namespace agex::study
