#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/models/rank_model.hpp"
#include "agex/nn/adam.hpp"
#include "agex/nn/loss.hpp"
#include "agex/training/config.hpp"
#include "agex/training/image_source.hpp"
#include "agex/training/pairs.hpp"
#include "agex/training/plateau.hpp"
#include "agex/training/train_age.hpp"

namespace agex {

struct RankTrainResult {
  RankModel model;
  TrainHistory history;
};

// Images for every id referenced by a pair list, with an id -> row index.
struct PairImages {
  nn::Tensor images;
  std::unordered_map<std::string, int> row;

  static PairImages load(const std::vector<PairSample>& pairs, const Manifest& manifest, const ImageSource& source,
                         int resolution) {
    std::unordered_map<std::string, const ManifestRecord*> by_id;
    for (const auto& r : manifest) by_id.emplace(r.image_id, &r);
    Manifest needed;
    PairImages out;
    for (const auto& p : pairs) {
      for (const auto* id : {&p.image_id_a, &p.image_id_b}) {
        if (out.row.count(*id)) continue;
        auto it = by_id.find(*id);
        if (it == by_id.end()) throw ConfigError("pair references unknown image " + *id);
        out.row.emplace(*id, static_cast<int>(needed.size()));
        needed.push_back(*it->second);
      }
    }
    out.images = load_image_set(needed, source, resolution).images;
    return out;
  }
};

// Pairs plus their swapped copies with inverted labels; exactly half the
// entries carry label 1.
inline std::vector<PairSample> swap_augment(const std::vector<PairSample>& pairs) {
  std::vector<PairSample> out;
  out.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    out.push_back(p);
    PairSample s = p;
    std::swap(s.image_id_a, s.image_id_b);
    s.label = 1 - p.label;
    out.push_back(std::move(s));
  }
  return out;
}

// Fraction of pairs ranked correctly with symmetric inference; a score of
// exactly 0.5 earns half credit.
inline double pair_accuracy(const RankModel& model, const std::vector<PairSample>& pairs, const PairImages& images,
                            int chunk = 128) {
  if (pairs.empty()) return 0.0;
  double correct = 0;
  std::vector<int> ra;
  std::vector<int> rb;
  for (std::size_t start = 0; start < pairs.size(); start += chunk) {
    ra.clear();
    rb.clear();
    const std::size_t end = std::min(pairs.size(), start + chunk);
    for (std::size_t i = start; i < end; ++i) {
      ra.push_back(images.row.at(pairs[i].image_id_a));
      rb.push_back(images.row.at(pairs[i].image_id_b));
    }
    const auto p = model.rank_batch(nn::gather(images.images, ra), nn::gather(images.images, rb));
    for (std::size_t i = start; i < end; ++i) {
      const double s = p[i - start];
      if (s == 0.5) {
        correct += 0.5;
      } else if ((s > 0.5) == (pairs[i].label == 1)) {
        correct += 1.0;
      }
    }
  }
  return correct / static_cast<double>(pairs.size());
}

// Binary cross-entropy on swap-augmented pairs; keeps the epoch with the
// lowest validation pair error rate (recorded in the val_mae column).
inline RankTrainResult train_ranking_model(const TrainConfig& config, const std::vector<PairSample>& train_pairs,
                                           const std::vector<PairSample>& val_pairs, const Manifest& manifest,
                                           const ImageSource& source, const BackboneConfig* backbone = nullptr,
                                           const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_pairs.empty()) throw ConfigError("no training pairs");
  if (val_pairs.empty()) throw ConfigError("no validation pairs");

  std::vector<PairSample> all = train_pairs;
  all.insert(all.end(), val_pairs.begin(), val_pairs.end());
  const PairImages images = PairImages::load(all, manifest, source, config.resolution);

  BackboneConfig arch = backbone ? *backbone : BackboneConfig::for_resolution(config.resolution);
  arch.resolution = config.resolution;
  RankModel model(arch, config.seed);
  nn::Adam adam(model.params());
  PlateauScheduler scheduler(config.initial_lr, config.plateau_factor, config.plateau_patience_epochs);
  std::mt19937_64 rng(derive_seed(config.seed, 0x7a9c));

  std::vector<PairSample> augmented = swap_augment(train_pairs);
  TrainHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<float> best_params = model.flat_values();
  std::vector<int> ra;
  std::vector<int> rb;
  std::vector<float> labels;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    std::shuffle(augmented.begin(), augmented.end(), rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < augmented.size(); start += config.batch_size) {
      const std::size_t end = std::min(augmented.size(), start + static_cast<std::size_t>(config.batch_size));
      ra.clear();
      rb.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        ra.push_back(images.row.at(augmented[i].image_id_a));
        rb.push_back(images.row.at(augmented[i].image_id_b));
        labels.push_back(static_cast<float>(augmented[i].label));
      }
      adam.zero_grad();
      const nn::Tensor logits = model.forward(nn::gather(images.images, ra), nn::gather(images.images, rb));
      nn::LossGrad lg = nn::sigmoid_bce(logits, labels);
      if (!std::isfinite(lg.loss)) {
        throw NumericError("non-finite ranking loss at epoch " + std::to_string(epoch));
      }
      model.backward(lg.grad);
      adam.step(lr);
      loss_sum += lg.loss * static_cast<double>(end - start);
    }
    const double val_error = 1.0 - pair_accuracy(model, val_pairs, images);
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(augmented.size()), val_error, lr});
    if (val_error < best) {
      best = val_error;
      history.selected_epoch = epoch;
      best_params = model.flat_values();
    }
    scheduler.step(val_error);
    if (on_epoch) on_epoch(history.epochs.back());
  }
  model.load_flat_values(best_params);
  return {std::move(model), std::move(history)};
}

}  // namespace agex
