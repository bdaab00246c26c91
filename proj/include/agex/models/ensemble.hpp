#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/models/age_model.hpp"

namespace agex {

inline double mean_sorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Image at each resolution, keyed by side length.
using ImagePyramid = std::map<int, GrayImage>;

inline ImagePyramid make_pyramid(const GrayImage& full, std::span<const int> resolutions) {
  ImagePyramid p;
  for (int r : resolutions) p.emplace(r, downsample(full, r));
  return p;
}

// Arithmetic mean of per-resolution estimates. Estimates are summed in sorted
// order so the result does not depend on the order of `models`.
inline AgeEstimate ensemble_estimate(std::span<const AgeModel* const> models, const ImagePyramid& pyramid) {
  if (models.empty()) throw ConfigError("ensemble needs at least one model");
  std::vector<double> ages;
  ages.reserve(models.size());
  for (const AgeModel* m : models) {
    auto it = pyramid.find(m->resolution());
    if (it == pyramid.end()) {
      throw ConfigError("image pyramid lacks resolution " + std::to_string(m->resolution()));
    }
    ages.push_back(m->estimate(it->second).age_years);
  }
  return {mean_sorted(ages), HeadType::ensemble, 0};
}

// Per-image ensemble over aligned prediction vectors (one vector per model).
inline std::vector<double> ensemble_predictions(const std::vector<std::vector<double>>& per_model) {
  if (per_model.empty()) throw ConfigError("ensemble needs at least one model");
  std::vector<double> out(per_model.front().size());
  std::vector<double> col(per_model.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t m = 0; m < per_model.size(); ++m) {
      if (per_model[m].size() != out.size()) throw ShapeError("ensemble prediction lengths differ");
      col[m] = per_model[m][i];
    }
    out[i] = mean_sorted(col);
  }
  return out;
}

}  // namespace agex
