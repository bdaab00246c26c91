#pragma once

#include <vector>

#include "agex/core/error.hpp"
#include "agex/training/train_age.hpp"

namespace agex {

struct SweepPoint {
  int size = 0;
  double test_mae = 0;
};

// One model per training-set size, identical config and seed otherwise.
inline std::vector<SweepPoint> dataset_size_sweep(const TrainConfig& config, const Manifest& manifest,
                                                  const SplitSpec& splits, const std::vector<int>& sizes,
                                                  const ImageSource& source, const BackboneConfig* backbone = nullptr) {
  if (sizes.empty()) throw ConfigError("sweep needs at least one size");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("sweep sizes must be >= 1");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sweep sizes must be strictly ascending");
    if (sizes[i] > static_cast<int>(splits.train_ids.size())) {
      throw ConfigError("sweep size " + std::to_string(sizes[i]) + " exceeds the training split (" +
                        std::to_string(splits.train_ids.size()) + " images)");
    }
  }
  const ImageSet test = load_image_set(select(manifest, splits, SplitPart::test), source, config.resolution);
  if (test.size() == 0) throw ConfigError("test split is empty");
  std::vector<SweepPoint> out;
  for (int n : sizes) {
    TrainConfig c = config;
    c.train_set_size_cap = n;
    const auto result = train_age_model(c, manifest, splits, source, backbone);
    out.push_back({n, mean_absolute_error(predict_ages(result.model, test.images), test.ages)});
  }
  return out;
}

}  // namespace agex
