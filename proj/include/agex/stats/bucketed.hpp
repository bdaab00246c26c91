#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"

namespace agex::stats {

// Statistics of values grouped by key into half-open buckets [k*w, (k+1)*w).
// bucket_edges has one more entry than the per-bucket vectors.
struct BucketedCurve {
  double bucket_width = 0;
  std::vector<double> bucket_edges;
  std::vector<double> mean;
  std::vector<double> sd;  // population sd; 0 for empty or single-value buckets
  std::vector<std::size_t> count;

  std::size_t buckets() const { return count.size(); }

  std::string to_csv() const {
    std::ostringstream os;
    os << "bucket_lo,bucket_hi,count,mean,sd\n";
    char buf[160];
    for (std::size_t i = 0; i < count.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu,%.6f,%.6f\n", bucket_edges[i], bucket_edges[i + 1], count[i],
                    mean[i], sd[i]);
      os << buf;
    }
    return os.str();
  }
};

// Buckets span from the lowest to the highest occupied bucket; gaps are
// reported with count 0 (mean and sd 0).
inline BucketedCurve bucketed_stats(const std::vector<std::pair<double, double>>& values, double bucket_width) {
  if (!(bucket_width > 0.0)) throw DomainError("bucket width must be > 0");
  BucketedCurve c;
  c.bucket_width = bucket_width;
  if (values.empty()) return c;
  long long lo = 0;
  long long hi = 0;
  bool first = true;
  std::vector<long long> keys;
  keys.reserve(values.size());
  for (const auto& [key, value] : values) {
    if (!std::isfinite(key) || !std::isfinite(value)) throw DomainError("bucketed_stats needs finite inputs");
    const auto k = static_cast<long long>(std::floor(key / bucket_width));
    keys.push_back(k);
    lo = first ? k : std::min(lo, k);
    hi = first ? k : std::max(hi, k);
    first = false;
  }
  const auto nb = static_cast<std::size_t>(hi - lo + 1);
  c.mean.assign(nb, 0.0);
  c.sd.assign(nb, 0.0);
  c.count.assign(nb, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = static_cast<std::size_t>(keys[i] - lo);
    c.count[b] += 1;
    c.mean[b] += values[i].second;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (c.count[b]) c.mean[b] /= static_cast<double>(c.count[b]);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = static_cast<std::size_t>(keys[i] - lo);
    const double d = values[i].second - c.mean[b];
    c.sd[b] += d * d;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (c.count[b]) c.sd[b] = std::sqrt(c.sd[b] / static_cast<double>(c.count[b]));
  }
  for (std::size_t b = 0; b <= nb; ++b) c.bucket_edges.push_back(static_cast<double>(lo + static_cast<long long>(b)) * bucket_width);
  return c;
}

inline nlohmann::json to_json(const BucketedCurve& c) {
  return {{"bucket_width", c.bucket_width}, {"bucket_edges", c.bucket_edges}, {"mean", c.mean}, {"sd", c.sd},
          {"count", c.count}};
}

}  // namespace agex::stats
