#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "agex/core/csv.hpp"
#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/phantom/params.hpp"

namespace agex {

enum class Sex { F, M };

struct ManifestRecord {
  std::string image_id;
  std::string patient_id;
  double age_years = 0;
  Sex sex = Sex::F;
  long long scan_date_offset_days = 0;
  std::string file_path;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

using Manifest = std::vector<ManifestRecord>;

inline constexpr const char* kManifestHeader = "image_id,patient_id,age_years,sex,scan_date_offset_days,file_path";

struct ManifestOptions {
  int n_patients = 1000;
  double multi_scan_fraction = 0.28;
  double age_mean = 61.2;
  double age_sd = 19.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> gauss(mean, sd);
  for (int i = 0; i < 100000; ++i) {
    double v = gauss(rng);
    if (v >= lo && v <= hi) return v;
  }
  // Mass inside [lo,hi] is negligible; fall back to the nearest bound.
  return std::clamp(mean, lo, hi);
}

}  // namespace detail

inline void validate_manifest(const Manifest& manifest) {
  std::set<std::string> ids;
  for (const auto& r : manifest) {
    if (!(r.age_years >= 0.0 && r.age_years <= kMaxAgeYears)) {
      throw DomainError("manifest age out of range for " + r.image_id);
    }
    if (r.image_id.empty() || r.patient_id.empty()) throw ValidationError("manifest ids must be non-empty");
    if (!ids.insert(r.image_id).second) throw ValidationError("duplicate image_id " + r.image_id);
  }
}

// Population of synthetic patients. Baseline ages follow a normal truncated
// to [0,105]; `multi_scan_fraction` of patients get 2-5 scans spread over up
// to ten years.
inline Manifest build_manifest(const ManifestOptions& opt) {
  if (opt.n_patients < 1) throw DomainError("n_patients must be >= 1");
  if (!(opt.multi_scan_fraction >= 0.0 && opt.multi_scan_fraction <= 1.0)) {
    throw DomainError("multi_scan_fraction must lie in [0,1]");
  }
  if (!(opt.age_sd > 0.0)) throw DomainError("age_sd must be positive");

  std::mt19937_64 rng(derive_seed(opt.seed, 1));
  const int n_multi = static_cast<int>(std::lround(opt.multi_scan_fraction * opt.n_patients));
  std::vector<int> order(opt.n_patients);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> multi(opt.n_patients, false);
  for (int i = 0; i < n_multi; ++i) multi[order[i]] = true;

  constexpr long long kMaxSpanDays = 3652;
  std::set<std::string> used_ids;
  Manifest out;
  for (int p = 0; p < opt.n_patients; ++p) {
    std::string pid;
    do {
      char buf[32];
      std::snprintf(buf, sizeof buf, "P%012llx", static_cast<unsigned long long>(rng() >> 16));
      pid = buf;
    } while (!used_ids.insert(pid).second);

    const Sex sex = (rng() & 1) ? Sex::M : Sex::F;
    double base = detail::truncated_normal(rng, opt.age_mean, opt.age_sd, 0.0, kMaxAgeYears);

    std::vector<long long> offsets{0};
    if (multi[p]) {
      const int n_scans = 2 + static_cast<int>(rng() % 4);
      const long long span = 1 + static_cast<long long>(rng() % kMaxSpanDays);
      std::set<long long> distinct{0, span};
      std::uniform_int_distribution<long long> day(1, std::max<long long>(1, span - 1));
      // Short spans cannot host many distinct days; stop at what fits.
      for (int tries = 0; static_cast<int>(distinct.size()) < n_scans && tries < 64; ++tries) {
        if (span > 1) distinct.insert(day(rng));
      }
      offsets.assign(distinct.begin(), distinct.end());
      base = std::min(base, kMaxAgeYears - static_cast<double>(span) / 365.25);
    }
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      ManifestRecord r;
      r.patient_id = pid;
      r.image_id = pid + "-" + std::to_string(s);
      r.age_years = std::clamp(detail::round6(base + static_cast<double>(offsets[s]) / 365.25), 0.0, kMaxAgeYears);
      r.sex = sex;
      r.scan_date_offset_days = offsets[s];
      r.file_path = "images/" + r.image_id + ".png";
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::string write_manifest_csv(const Manifest& manifest) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  for (const auto& r : manifest) {
    char age[32];
    std::snprintf(age, sizeof age, "%.6f", r.age_years);
    csv::write_row(os, r.image_id, r.patient_id, age, r.sex == Sex::F ? "F" : "M", r.scan_date_offset_days,
                   r.file_path);
  }
  return os.str();
}

inline Manifest read_manifest_csv(std::string_view text) {
  const csv::Table t = csv::parse(text);
  std::string header;
  for (std::size_t i = 0; i < t.header.size(); ++i) header += (i ? "," : "") + t.header[i];
  if (header != kManifestHeader) throw ValidationError("manifest header mismatch: " + header);
  Manifest out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    ManifestRecord r;
    r.image_id = row[0];
    r.patient_id = row[1];
    r.age_years = csv::to_double(row[2]);
    if (row[3] == "F") {
      r.sex = Sex::F;
    } else if (row[3] == "M") {
      r.sex = Sex::M;
    } else {
      throw ValidationError("sex must be F or M, got '" + row[3] + "'");
    }
    r.scan_date_offset_days = csv::to_int(row[4]);
    r.file_path = row[5];
    out.push_back(std::move(r));
  }
  validate_manifest(out);
  return out;
}

// Index of records by patient, in manifest order.
inline std::unordered_map<std::string, std::vector<std::size_t>> group_by_patient(const Manifest& manifest) {
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.size(); ++i) groups[manifest[i].patient_id].push_back(i);
  return groups;
}

}  // namespace agex
