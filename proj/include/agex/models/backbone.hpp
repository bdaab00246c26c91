#pragma once

#include <algorithm>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/nn/layers.hpp"
#include "agex/nn/sequential.hpp"
#include "agex/phantom/image.hpp"

namespace agex {

// Stack of stride-2 3x3 conv blocks followed by global average pooling. The
// feature dimension equals the last block's channel count.
struct BackboneConfig {
  int resolution = 64;
  std::vector<int> channels{16, 32, 64, 128};

  int feature_dim() const { return channels.empty() ? 0 : channels.back(); }

  // One block per halving down to a 4x4 map, so the receptive field covers
  // about half the image at every resolution.
  static BackboneConfig for_resolution(int resolution) {
    BackboneConfig c;
    c.resolution = resolution;
    c.channels.clear();
    for (int side = resolution, ch = 16; side > 4; side /= 2, ch = std::min(ch * 2, 128)) c.channels.push_back(ch);
    if (c.channels.empty()) c.channels.push_back(16);
    return c;
  }

  nlohmann::json to_json() const { return {{"resolution", resolution}, {"channels", channels}}; }
  static BackboneConfig from_json(const nlohmann::json& j) {
    BackboneConfig c;
    c.resolution = j.at("resolution").get<int>();
    c.channels = j.at("channels").get<std::vector<int>>();
    return c;
  }
};

struct FeatureVector {
  std::vector<float> values;
};

inline nn::Sequential make_backbone(const BackboneConfig& cfg, std::mt19937_64& rng, float slope = 0.0f) {
  if (cfg.channels.empty()) throw ConfigError("backbone needs at least one block");
  nn::Sequential net;
  int in = 1;
  for (int ch : cfg.channels) {
    net.add<nn::Conv2d>(in, ch, 3, 2, 1, rng);
    net.add<nn::LeakyRelu>(slope);
    in = ch;
  }
  net.add<nn::GlobalAvgPool>();
  return net;
}

inline nn::Tensor image_batch(std::span<const GrayImage> images) {
  if (images.empty()) return {};
  const int r = images.front().resolution();
  nn::Tensor t(static_cast<int>(images.size()), 1, r, r);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].resolution() != r) throw ShapeError("image batch mixes resolutions");
    std::copy(images[i].pixels().begin(), images[i].pixels().end(), t.sample(static_cast<int>(i)));
  }
  return t;
}

inline nn::Tensor image_batch(const GrayImage& image) { return image_batch(std::span<const GrayImage>(&image, 1)); }

inline void check_resolution(const GrayImage& image, int expected) {
  if (image.resolution() != expected) {
    throw ShapeError("model expects " + std::to_string(expected) + "^2 input, got " +
                     std::to_string(image.resolution()) + "^2");
  }
}

}  // namespace agex
