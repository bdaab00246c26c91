#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/models/backbone.hpp"
#include "agex/models/checkpoint.hpp"
#include "agex/models/heads.hpp"
#include "agex/nn/loss.hpp"

namespace agex {

// Siamese pair model: both images go through one shared backbone, the two
// feature vectors are concatenated, and a small MLP emits the logit that the
// second image is older.
class RankModel {
 public:
  RankModel(BackboneConfig backbone, std::uint64_t seed, int hidden = 64) : cfg_(std::move(backbone)), hidden_(hidden) {
    std::mt19937_64 rng(derive_seed(seed, 0x4a4b));
    backbone_ = make_backbone(cfg_, rng);
    fc_.add<nn::Linear>(2 * cfg_.feature_dim(), hidden_, rng);
    fc_.add<nn::LeakyRelu>(0.0f);
    fc_.add<nn::Linear>(hidden_, 1, rng);
  }

  int resolution() const { return cfg_.resolution; }

  // Raw network probability f(a, b) that b is older, one per pair.
  std::vector<double> raw_probability(const nn::Tensor& a, const nn::Tensor& b) const {
    check(a);
    check(b);
    const nn::Tensor both = backbone_.infer(nn::concat_batch(a, b));
    auto [fa, fb] = nn::split_batch(both, a.n);
    const nn::Tensor logits = fc_.infer(nn::concat_channels(fa, fb));
    std::vector<double> p(a.n);
    for (int i = 0; i < a.n; ++i) p[i] = nn::sigmoid(logits.data[i]);
    return p;
  }

  // Order-symmetrised score p = (f(a,b) + 1 - f(b,a)) / 2, so that
  // p(a,b) + p(b,a) == 1 holds exactly.
  std::vector<double> rank_batch(const nn::Tensor& a, const nn::Tensor& b) const {
    const auto ab = raw_probability(a, b);
    const auto ba = raw_probability(b, a);
    std::vector<double> p(ab.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = symmetric(ab[i], ba[i]);
    return p;
  }

  // (f_ab + 1 - f_ba) / 2, evaluated so that symmetric(x, y) + symmetric(y, x)
  // is exactly 1 in floating point: the difference is antisymmetric, the
  // upper half is formed once, and the lower half is its exact complement.
  static double symmetric(double f_ab, double f_ba) {
    const double d = (f_ab - 0.5) - (f_ba - 0.5);
    const double hi = 0.5 + 0.5 * std::abs(d);
    return d >= 0.0 ? hi : 1.0 - hi;
  }

  RankScore rank_pair(const GrayImage& a, const GrayImage& b) const {
    check_resolution(a, cfg_.resolution);
    check_resolution(b, cfg_.resolution);
    return {rank_batch(image_batch(a), image_batch(b)).front()};
  }

  // Training path on a batch of pairs; returns logits (n, 1).
  nn::Tensor forward(const nn::Tensor& a, const nn::Tensor& b) {
    const nn::Tensor both = backbone_.forward(nn::concat_batch(a, b));
    auto [fa, fb] = nn::split_batch(both, a.n);
    return fc_.forward(nn::concat_channels(fa, fb));
  }

  void backward(const nn::Tensor& grad_logits) {
    const nn::Tensor g = fc_.backward(grad_logits);
    auto [ga, gb] = nn::split_channels(g, cfg_.feature_dim());
    backbone_.backward(nn::concat_batch(ga, gb));
  }

  std::vector<nn::Param*> params() {
    auto p = backbone_.params();
    for (auto* q : fc_.params()) p.push_back(q);
    return p;
  }

  std::vector<float> flat_values() const {
    auto v = backbone_.flat_values();
    auto h = fc_.flat_values();
    v.insert(v.end(), h.begin(), h.end());
    return v;
  }

  void load_flat_values(const std::vector<float>& flat) {
    const std::size_t nb = backbone_.num_params();
    if (flat.size() != nb + fc_.num_params()) throw ShapeError("checkpoint parameter count mismatch");
    backbone_.load_flat_values({flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(nb)});
    fc_.load_flat_values({flat.begin() + static_cast<std::ptrdiff_t>(nb), flat.end()});
  }

  Checkpoint to_checkpoint(const nlohmann::json& train_config = nlohmann::json::object()) const {
    Checkpoint ck;
    ck.meta = {{"format", "agex-checkpoint"},
               {"version", 1},
               {"kind", "rank_model"},
               {"resolution", cfg_.resolution},
               {"backbone", cfg_.to_json()},
               {"hidden", hidden_},
               {"train_config", train_config},
               {"config_hash", config_hash(train_config)},
               {"param_count", backbone_.num_params() + fc_.num_params()}};
    ck.params = flat_values();
    return ck;
  }

  static RankModel from_checkpoint(const Checkpoint& ck) {
    if (ck.kind() != "rank_model") throw ConfigError("checkpoint is a '" + ck.kind() + "', not a rank model");
    RankModel m(BackboneConfig::from_json(ck.meta.at("backbone")), 0, ck.meta.at("hidden").get<int>());
    m.load_flat_values(ck.params);
    return m;
  }

 private:
  void check(const nn::Tensor& t) const {
    if (t.h != cfg_.resolution || t.w != cfg_.resolution) {
      throw ShapeError("rank model expects " + std::to_string(cfg_.resolution) + "^2 input, got " + t.shape_str());
    }
  }

  BackboneConfig cfg_;
  int hidden_;
  nn::Sequential backbone_;
  nn::Sequential fc_;
};

}  // namespace agex
