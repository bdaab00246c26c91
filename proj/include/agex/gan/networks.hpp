#pragma once

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
#include "agex/nn/layers.hpp"
#include "agex/nn/sequential.hpp"
#include "agex/phantom/image.hpp"
#include "agex/phantom/params.hpp"

namespace agex::gan {

inline constexpr int kLatentDim = 512;

struct LatentIdentity {
  std::vector<float> w;

  static LatentIdentity sample(std::mt19937_64& rng) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    LatentIdentity id;
    id.w.resize(kLatentDim);
    for (float& v : id.w) v = g(rng);
    return id;
  }

  static LatentIdentity from_seed(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x1a7e));
    return sample(rng);
  }

  void validate() const {
    if (w.size() != static_cast<std::size_t>(kLatentDim)) throw ShapeError("latent identity must have 512 entries");
    for (float v : w) {
      if (!std::isfinite(v)) throw DomainError("latent identity is not finite");
    }
  }
};

struct AgeTarget {
  double age_years = 0;

  explicit AgeTarget(double age) : age_years(age) { check_age(age); }
  double normalized() const { return age_years / kMaxAgeYears; }
};

struct GeneratorConfig {
  int resolution = 64;
  // Channels of the 4x4 seed map and of each intermediate stage; the last
  // upsampling stage projects straight to the output image.
  std::vector<int> channels{128, 64, 32, 16};

  int stages() const {
    int s = 0;
    for (int r = 4; r < resolution; r *= 2) ++s;
    return s;
  }

  void validate() const {
    if (resolution < 8 || (resolution & (resolution - 1)) != 0) {
      throw ConfigError("generator resolution must be a power of two >= 8");
    }
    if (static_cast<int>(channels.size()) != stages()) {
      throw ConfigError("generator needs " + std::to_string(stages()) + " channel entries at resolution " +
                        std::to_string(resolution));
    }
  }

  nlohmann::json to_json() const { return {{"resolution", resolution}, {"channels", channels}}; }
  static GeneratorConfig from_json(const nlohmann::json& j) {
    return {j.at("resolution").get<int>(), j.at("channels").get<std::vector<int>>()};
  }
};

// [age/105 || w] -> linear 4x4 seed map -> per stage: nearest upsample,
// append a constant age/105 plane, 3x3 conv, leaky ReLU. The last stage
// convolves to one channel with a sigmoid. Feeding the age to every stage
// keeps the conditioning from washing out against 512 latent inputs.
class Generator {
 public:
  Generator(GeneratorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(derive_seed(seed, 0x6e4));
    const int c0 = cfg_.channels[0];
    stem_.add<nn::Linear>(kLatentDim + 1, c0 * 16, rng);
    stem_.add<nn::LeakyRelu>(0.2f);
    stem_.add<nn::Reshape>(c0, 4, 4);
    for (int s = 0; s < cfg_.stages(); ++s) {
      const bool last = s + 1 == cfg_.stages();
      nn::Sequential stage;
      stage.add<nn::Conv2d>(cfg_.channels[s] + 1, last ? 1 : cfg_.channels[s + 1], 3, 1, 1, rng);
      if (last) {
        stage.add<nn::Sigmoid>();
      } else {
        stage.add<nn::LeakyRelu>(0.2f);
      }
      stages_.push_back(std::move(stage));
    }
  }

  const GeneratorConfig& config() const { return cfg_; }
  int resolution() const { return cfg_.resolution; }

  static nn::Tensor conditioning(std::span<const double> ages, std::span<const LatentIdentity> ws) {
    if (ages.size() != ws.size()) throw ShapeError("ages and latents differ in count");
    nn::Tensor z(static_cast<int>(ages.size()), kLatentDim + 1, 1, 1);
    for (std::size_t i = 0; i < ages.size(); ++i) {
      ws[i].validate();
      float* row = z.sample(static_cast<int>(i));
      row[0] = static_cast<float>(AgeTarget(ages[i]).normalized());
      std::copy(ws[i].w.begin(), ws[i].w.end(), row + 1);
    }
    return z;
  }

  nn::Tensor forward(const nn::Tensor& z) {
    check_input(z);
    nn::Tensor h = stem_.forward(z);
    for (auto& stage : stages_) h = stage.forward(with_age_plane(nn::Upsample2x().infer(h), z));
    return h;
  }

  nn::Tensor infer(const nn::Tensor& z) const {
    check_input(z);
    nn::Tensor h = stem_.infer(z);
    for (const auto& stage : stages_) h = stage.infer(with_age_plane(nn::Upsample2x().infer(h), z));
    return h;
  }

  // Returns dL/dz for the latent part; the age planes are inputs, not
  // parameters, so their gradient is dropped.
  nn::Tensor backward(const nn::Tensor& dy) {
    nn::Tensor g = dy;
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
      g = nn::Upsample2x().backward(drop_last_channel(it->backward(g)));
    }
    return stem_.backward(g);
  }

  GrayImage generate(double age, const LatentIdentity& w) const {
    const nn::Tensor img = infer(conditioning(std::span<const double>(&age, 1), std::span<const LatentIdentity>(&w, 1)));
    GrayImage out(cfg_.resolution);
    std::copy(img.data.begin(), img.data.end(), out.pixels().begin());
    return out;
  }

  std::vector<nn::Param*> params() {
    auto p = stem_.params();
    for (auto& s : stages_) {
      for (auto* q : s.params()) p.push_back(q);
    }
    return p;
  }

  std::size_t num_params() const {
    std::size_t n = stem_.num_params();
    for (const auto& s : stages_) n += s.num_params();
    return n;
  }

  std::vector<float> flat_values() const {
    auto v = stem_.flat_values();
    for (const auto& s : stages_) {
      auto f = s.flat_values();
      v.insert(v.end(), f.begin(), f.end());
    }
    return v;
  }

  void load_flat_values(const std::vector<float>& flat) {
    if (flat.size() != num_params()) throw ShapeError("checkpoint parameter count mismatch");
    auto it = flat.begin();
    auto take = [&](nn::Sequential& s) {
      const auto n = static_cast<std::ptrdiff_t>(s.num_params());
      s.load_flat_values({it, it + n});
      it += n;
    };
    take(stem_);
    for (auto& s : stages_) take(s);
  }

  std::uint64_t checksum() const { return fnv1a64(std::as_bytes(std::span<const float>(flat_values()))); }

  void set_trainable(bool t) {
    stem_.set_trainable(t);
    for (auto& s : stages_) s.set_trainable(t);
  }

  Checkpoint to_checkpoint(const nlohmann::json& train_config = nlohmann::json::object()) const {
    Checkpoint ck;
    ck.meta = {{"format", "agex-checkpoint"},
               {"version", 1},
               {"kind", "generator"},
               {"resolution", cfg_.resolution},
               {"latent_dim", kLatentDim},
               {"generator", cfg_.to_json()},
               {"train_config", train_config},
               {"config_hash", config_hash(train_config)},
               {"param_count", num_params()}};
    ck.params = flat_values();
    return ck;
  }

  static Generator from_checkpoint(const Checkpoint& ck) {
    if (ck.kind() != "generator") throw ConfigError("checkpoint is a '" + ck.kind() + "', not a generator");
    Generator g(GeneratorConfig::from_json(ck.meta.at("generator")), 0);
    g.load_flat_values(ck.params);
    return g;
  }

 private:
  static void check_input(const nn::Tensor& z) {
    if (z.c != kLatentDim + 1 || z.h != 1 || z.w != 1) {
      throw ShapeError("generator expects (n, 513, 1, 1) conditioning, got " + z.shape_str());
    }
  }

  static nn::Tensor with_age_plane(const nn::Tensor& h, const nn::Tensor& z) {
    nn::Tensor out(h.n, h.c + 1, h.h, h.w);
    const std::size_t plane = static_cast<std::size_t>(h.h) * h.w;
    for (int i = 0; i < h.n; ++i) {
      const float* src = h.sample(i);
      float* dst = out.sample(i);
      std::copy(src, src + plane * h.c, dst);
      std::fill(dst + plane * h.c, dst + plane * (h.c + 1), z.sample(i)[0]);
    }
    return out;
  }

  static nn::Tensor drop_last_channel(const nn::Tensor& g) {
    nn::Tensor out(g.n, g.c - 1, g.h, g.w);
    const std::size_t keep = static_cast<std::size_t>(g.c - 1) * g.h * g.w;
    for (int i = 0; i < g.n; ++i) std::copy(g.sample(i), g.sample(i) + keep, out.sample(i));
    return out;
  }

  GeneratorConfig cfg_;
  nn::Sequential stem_;
  std::vector<nn::Sequential> stages_;
};

// Backbone-shaped critic with leaky ReLU and a single realism logit. It sees
// only the image, not the age.
class Discriminator {
 public:
  Discriminator(BackboneConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    std::mt19937_64 rng(derive_seed(seed, 0xd15c));
    net_ = make_backbone(cfg_, rng, 0.2f);
    net_.add<nn::Linear>(cfg_.feature_dim(), 1, rng);
  }

  int resolution() const { return cfg_.resolution; }
  const BackboneConfig& config() const { return cfg_; }

  nn::Tensor forward(const nn::Tensor& x) { return net_.forward(x); }
  nn::Tensor infer(const nn::Tensor& x) const { return net_.infer(x); }
  nn::Tensor backward(const nn::Tensor& dy) { return net_.backward(dy); }

  std::vector<nn::Param*> params() { return net_.params(); }
  std::vector<float> flat_values() const { return net_.flat_values(); }
  void load_flat_values(const std::vector<float>& v) { net_.load_flat_values(v); }
  std::uint64_t checksum() const { return net_.checksum(); }
  void set_trainable(bool t) { net_.set_trainable(t); }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.meta = {{"format", "agex-checkpoint"},  {"version", 1},
               {"kind", "discriminator"},      {"resolution", cfg_.resolution},
               {"backbone", cfg_.to_json()},   {"param_count", net_.num_params()}};
    ck.params = flat_values();
    return ck;
  }

  static Discriminator from_checkpoint(const Checkpoint& ck) {
    if (ck.kind() != "discriminator") throw ConfigError("checkpoint is a '" + ck.kind() + "', not a discriminator");
    Discriminator d(BackboneConfig::from_json(ck.meta.at("backbone")), 0);
    d.load_flat_values(ck.params);
    return d;
  }

 private:
  BackboneConfig cfg_;
  nn::Sequential net_;
};

}  // namespace agex::gan
