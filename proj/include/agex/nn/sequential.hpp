#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/nn/layers.hpp"

namespace agex::nn {

// Ordered stack of layers with value semantics (copies deep-clone layers).
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& o) {
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& o) {
    if (this != &o) {
      Sequential tmp(o);
      layers_.swap(tmp.layers_);
    }
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& x) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }

  Tensor infer(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->infer(h);
    return h;
  }

  Tensor backward(const Tensor& dy) {
    Tensor g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
      for (Param* p : l->params()) out.push_back(p);
    }
    return out;
  }

  std::vector<const Param*> params() const {
    std::vector<const Param*> out;
    for (const auto& l : layers_) {
      for (Param* p : l->params()) out.push_back(p);
    }
    return out;
  }

  void zero_grad() {
    for (Param* p : params()) p->zero_grad();
  }

  // Frozen layers still propagate input gradients but never accumulate
  // parameter gradients.
  void set_trainable(bool trainable) {
    for (Param* p : params()) p->trainable = trainable;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const Param* p : params()) n += p->value.size();
    return n;
  }

  std::vector<float> flat_values() const {
    std::vector<float> out;
    out.reserve(num_params());
    for (const Param* p : params()) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
  }

  void load_flat_values(const std::vector<float>& flat) {
    if (flat.size() != num_params()) throw ShapeError("parameter count mismatch while loading");
    std::size_t off = 0;
    for (Param* p : params()) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p->value.size(), p->value.begin());
      off += p->value.size();
    }
  }

  // FNV-1a over the raw bytes of every parameter value.
  std::uint64_t checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Param* p : params()) {
      h = fnv1a64(std::as_bytes(std::span<const float>(p->value)), h);
    }
    return h;
  }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace agex::nn
