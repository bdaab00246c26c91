#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/models/age_model.hpp"
#include "agex/nn/adam.hpp"
#include "agex/nn/loss.hpp"
#include "agex/phantom/splits.hpp"
#include "agex/training/config.hpp"
#include "agex/training/image_source.hpp"
#include "agex/training/plateau.hpp"

namespace agex {

struct AgeTrainResult {
  AgeModel model;
  TrainHistory history;
};

// Optional per-epoch progress callback (epoch record just appended).
using EpochCallback = std::function<void(const EpochRecord&)>;

inline std::vector<double> predict_ages(const AgeModel& model, const nn::Tensor& images, int chunk = 256) {
  std::vector<double> out;
  out.reserve(images.n);
  std::vector<int> rows;
  for (int start = 0; start < images.n; start += chunk) {
    rows.clear();
    for (int i = start; i < std::min(images.n, start + chunk); ++i) rows.push_back(i);
    auto part = model.estimate_batch(nn::gather(images, rows));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

inline double mean_absolute_error(const std::vector<double>& pred, const std::vector<float>& truth) {
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

namespace detail {

// Loss and output-gradient for one batch under the model's head.
inline nn::LossGrad head_loss(HeadType head, const nn::Tensor& out, std::span<const float> ages) {
  const int n = out.n;
  switch (head) {
    case HeadType::regression: {
      nn::Tensor rect = out;
      for (float& v : rect.data) v = std::max(v, 0.0f);
      nn::LossGrad lg = nn::mse(rect, ages);
      for (int i = 0; i < n; ++i) {
        if (!(out.data[i] > 0.0f)) lg.grad.data[i] = 0.0f;
      }
      return lg;
    }
    case HeadType::expectation: {
      // Two-bin soft label: mass split between the neighbouring integer ages
      // so the target distribution's mean is exactly the continuous age.
      std::vector<float> t(static_cast<std::size_t>(n) * AgeLabels::kCount, 0.0f);
      for (int i = 0; i < n; ++i) {
        const double a = std::clamp(static_cast<double>(ages[i]), 0.0, 105.0);
        const int lo = std::min(static_cast<int>(std::floor(a)), AgeLabels::kLast);
        const double frac = a - lo;
        t[static_cast<std::size_t>(i) * AgeLabels::kCount + lo] += static_cast<float>(1.0 - frac);
        if (lo < AgeLabels::kLast) t[static_cast<std::size_t>(i) * AgeLabels::kCount + lo + 1] += static_cast<float>(frac);
      }
      return nn::softmax_cross_entropy(out, t);
    }
    case HeadType::ordinal: {
      // Soft exceedance targets clamp(a - c_j, 0, 1); they sum to a exactly.
      std::vector<float> t(static_cast<std::size_t>(n) * AgeLabels::kCount);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < AgeLabels::kCount; ++j) {
          t[static_cast<std::size_t>(i) * AgeLabels::kCount + j] =
              static_cast<float>(std::clamp(ages[i] - AgeLabels::value(j), 0.0, 1.0));
        }
      }
      return nn::sigmoid_bce(out, t);
    }
    case HeadType::ensemble:
      break;
  }
  throw ConfigError("ensemble is not a trainable head");
}

inline std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace detail

// Shuffled, optionally capped, training records.
inline Manifest training_records(const Manifest& manifest, const SplitSpec& splits, const TrainConfig& config) {
  Manifest train = select(manifest, splits, SplitPart::train);
  if (config.train_set_size_cap) {
    if (*config.train_set_size_cap > static_cast<int>(train.size())) {
      throw ConfigError("train_set_size_cap " + std::to_string(*config.train_set_size_cap) +
                        " exceeds the training split (" + std::to_string(train.size()) + " images)");
    }
    std::mt19937_64 rng(derive_seed(config.seed, 0xca9));
    std::shuffle(train.begin(), train.end(), rng);
    train.resize(static_cast<std::size_t>(*config.train_set_size_cap));
  }
  return train;
}

// Trains one age model; returns the parameters of the epoch with the lowest
// validation MAE. Deterministic given config, data and seed.
inline AgeTrainResult train_age_model(const TrainConfig& config, const Manifest& manifest, const SplitSpec& splits,
                                      const ImageSource& source, const BackboneConfig* backbone = nullptr,
                                      const EpochCallback& on_epoch = {}) {
  config.validate();
  const Manifest train_records = training_records(manifest, splits, config);
  const Manifest val_records = select(manifest, splits, SplitPart::val);
  if (train_records.empty()) throw ConfigError("training split is empty");
  if (val_records.empty()) throw ConfigError("validation split is empty");

  const ImageSet train = load_image_set(train_records, source, config.resolution);
  const ImageSet val = load_image_set(val_records, source, config.resolution);

  BackboneConfig arch = backbone ? *backbone : BackboneConfig::for_resolution(config.resolution);
  arch.resolution = config.resolution;
  AgeModel model(config.head, arch, config.seed);
  if (config.head == HeadType::regression) {
    const double mean = std::accumulate(train.ages.begin(), train.ages.end(), 0.0) / train.size();
    model.set_output_bias(static_cast<float>(mean));
  }

  nn::Adam adam(model.params());
  PlateauScheduler scheduler(config.initial_lr, config.plateau_factor, config.plateau_patience_epochs);
  std::mt19937_64 rng(derive_seed(config.seed, 0xe90c));

  TrainHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<float> best_params = model.flat_values();
  std::vector<int> order = detail::iota_vec(train.size());
  std::vector<float> batch_ages;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int seen = 0;
    for (int start = 0; start < train.size(); start += config.batch_size) {
      const int end = std::min(train.size(), start + config.batch_size);
      std::span<const int> rows(order.data() + start, static_cast<std::size_t>(end - start));
      batch_ages.clear();
      for (int r : rows) batch_ages.push_back(train.ages[r]);
      adam.zero_grad();
      const nn::Tensor out = model.forward(nn::gather(train.images, rows));
      nn::LossGrad lg = detail::head_loss(config.head, out, batch_ages);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                           std::to_string(start) + " (lr " + std::to_string(lr) + ")");
      }
      model.backward(lg.grad);
      adam.step(lr);
      loss_sum += lg.loss * static_cast<double>(rows.size());
      seen += static_cast<int>(rows.size());
    }
    const double val_mae = mean_absolute_error(predict_ages(model, val.images), val.ages);
    history.epochs.push_back({epoch, loss_sum / seen, val_mae, lr});
    if (val_mae < best) {
      best = val_mae;
      history.selected_epoch = epoch;
      best_params = model.flat_values();
    }
    scheduler.step(val_mae);
    if (on_epoch) on_epoch(history.epochs.back());
  }
  model.load_flat_values(best_params);
  return {std::move(model), std::move(history)};
}

}  // namespace agex
