#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/models/backbone.hpp"
#include "agex/models/checkpoint.hpp"
#include "agex/models/heads.hpp"
#include "agex/nn/loss.hpp"

namespace agex {

// Backbone plus one of the three age heads. The head emits raw outputs
// (pre-activation scalar, softmax logits, or exceedance logits); the
// activation and read-out happen in `ages_from_output`.
class AgeModel {
 public:
  AgeModel(HeadType head, BackboneConfig backbone, std::uint64_t seed) : head_type_(head), cfg_(std::move(backbone)) {
    if (head == HeadType::ensemble) throw ConfigError("ensemble is not a trainable head");
    std::mt19937_64 rng(derive_seed(seed, 0xa9e));
    backbone_ = make_backbone(cfg_, rng);
    head_.add<nn::Linear>(cfg_.feature_dim(), output_dim(), rng);
  }

  HeadType head() const { return head_type_; }
  int resolution() const { return cfg_.resolution; }
  const BackboneConfig& backbone_config() const { return cfg_; }

  int output_dim() const { return head_type_ == HeadType::regression ? 1 : AgeLabels::kCount; }

  FeatureVector backbone_forward(const GrayImage& image) const {
    check_resolution(image, cfg_.resolution);
    const nn::Tensor f = backbone_.infer(image_batch(image));
    return {std::vector<float>(f.data.begin(), f.data.end())};
  }

  AgeEstimate estimate(const GrayImage& image) const {
    check_resolution(image, cfg_.resolution);
    return {estimate_batch(image_batch(image)).front(), head_type_, cfg_.resolution};
  }

  std::vector<double> estimate_batch(const nn::Tensor& images) const {
    if (images.h != cfg_.resolution || images.w != cfg_.resolution) {
      throw ShapeError("model expects " + std::to_string(cfg_.resolution) + "^2 input, got " + images.shape_str());
    }
    return ages_from_output(head_.infer(backbone_.infer(images)));
  }

  // Estimates from raw head outputs, one per sample.
  std::vector<double> ages_from_output(const nn::Tensor& out) const {
    std::vector<double> ages(out.n);
    std::vector<double> probs(AgeLabels::kCount);
    for (int i = 0; i < out.n; ++i) {
      const float* z = out.sample(i);
      switch (head_type_) {
        case HeadType::regression:
          ages[i] = head_regression(z[0]).age_years;
          break;
        case HeadType::expectation: {
          double zmax = z[0];
          for (int j = 1; j < AgeLabels::kCount; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
          double sum = 0;
          for (int j = 0; j < AgeLabels::kCount; ++j) sum += (probs[j] = std::exp(z[j] - zmax));
          for (double& p : probs) p /= sum;
          ages[i] = head_expectation(probs).age_years;
          break;
        }
        case HeadType::ordinal:
          for (int j = 0; j < AgeLabels::kCount; ++j) probs[j] = nn::sigmoid(z[j]);
          ages[i] = head_ordinal(probs).age_years;
          break;
        case HeadType::ensemble:
          throw ConfigError("ensemble is not a trainable head");
      }
    }
    return ages;
  }

  // d(age estimate)/d(raw output) scaled per sample by d_age[i]; zero where the
  // read-out is clamped.
  nn::Tensor output_grad(const nn::Tensor& out, std::span<const double> d_age) const {
    nn::Tensor g(out.n, out.c, out.h, out.w);
    const auto ages = ages_from_output(out);
    std::vector<double> probs(AgeLabels::kCount);
    for (int i = 0; i < out.n; ++i) {
      const float* z = out.sample(i);
      float* gz = g.sample(i);
      switch (head_type_) {
        case HeadType::regression:
          gz[0] = z[0] > 0.0f ? static_cast<float>(d_age[i]) : 0.0f;
          break;
        case HeadType::expectation: {
          double zmax = z[0];
          for (int j = 1; j < AgeLabels::kCount; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
          double sum = 0;
          for (int j = 0; j < AgeLabels::kCount; ++j) sum += (probs[j] = std::exp(z[j] - zmax));
          double mean = 0;
          for (int j = 0; j < AgeLabels::kCount; ++j) mean += (probs[j] /= sum) * AgeLabels::value(j);
          for (int j = 0; j < AgeLabels::kCount; ++j) {
            gz[j] = static_cast<float>(d_age[i] * probs[j] * (AgeLabels::value(j) - mean));
          }
          break;
        }
        case HeadType::ordinal: {
          const bool clamped = ages[i] <= 0.0 || ages[i] >= AgeLabels::kLast;
          for (int j = 0; j < AgeLabels::kCount; ++j) {
            const double s = nn::sigmoid(z[j]);
            gz[j] = clamped ? 0.0f : static_cast<float>(d_age[i] * s * (1.0 - s));
          }
          break;
        }
        case HeadType::ensemble:
          throw ConfigError("ensemble is not a trainable head");
      }
    }
    return g;
  }

  // Training path: caches activations for `backward`.
  nn::Tensor forward(const nn::Tensor& images) { return head_.forward(backbone_.forward(images)); }

  // Returns dL/d(images).
  nn::Tensor backward(const nn::Tensor& grad_out) { return backbone_.backward(head_.backward(grad_out)); }

  std::vector<nn::Param*> params() {
    auto p = backbone_.params();
    for (auto* q : head_.params()) p.push_back(q);
    return p;
  }

  void set_trainable(bool trainable) {
    backbone_.set_trainable(trainable);
    head_.set_trainable(trainable);
  }

  std::vector<float> flat_values() const {
    auto v = backbone_.flat_values();
    auto h = head_.flat_values();
    v.insert(v.end(), h.begin(), h.end());
    return v;
  }

  void load_flat_values(const std::vector<float>& flat) {
    const std::size_t nb = backbone_.num_params();
    if (flat.size() != nb + head_.num_params()) throw ShapeError("checkpoint parameter count mismatch");
    backbone_.load_flat_values({flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(nb)});
    head_.load_flat_values({flat.begin() + static_cast<std::ptrdiff_t>(nb), flat.end()});
  }

  std::uint64_t checksum() const { return fnv1a64(std::as_bytes(std::span<const float>(flat_values()))); }

  // Starts the regression output at a sensible age so the rectifier is live.
  void set_output_bias(float value) {
    auto params = head_.params();
    std::fill(params.back()->value.begin(), params.back()->value.end(), value);
  }

  Checkpoint to_checkpoint(const nlohmann::json& train_config = nlohmann::json::object()) const {
    Checkpoint ck;
    ck.meta = {{"format", "agex-checkpoint"},
               {"version", 1},
               {"kind", "age_model"},
               {"head", std::string(to_string(head_type_))},
               {"resolution", cfg_.resolution},
               {"backbone", cfg_.to_json()},
               {"labels", {{"first", AgeLabels::kFirst}, {"last", AgeLabels::kLast}}},
               {"train_config", train_config},
               {"config_hash", config_hash(train_config)},
               {"param_count", backbone_.num_params() + head_.num_params()}};
    ck.params = flat_values();
    return ck;
  }

  static AgeModel from_checkpoint(const Checkpoint& ck) {
    if (ck.kind() != "age_model") throw ConfigError("checkpoint is a '" + ck.kind() + "', not an age model");
    AgeModel m(parse_head(ck.meta.at("head").get<std::string>()), BackboneConfig::from_json(ck.meta.at("backbone")), 0);
    m.load_flat_values(ck.params);
    return m;
  }

 private:
  HeadType head_type_;
  BackboneConfig cfg_;
  nn::Sequential backbone_;
  nn::Sequential head_;
};

}  // namespace agex
