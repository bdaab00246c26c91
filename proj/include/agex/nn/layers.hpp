#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "agex/core/error.hpp"
#include "agex/nn/tensor.hpp"

namespace agex::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Param {
  std::string name;
  std::vector<int> shape;
  FloatBuffer value;
  FloatBuffer grad;
  bool trainable = true;

  Param() = default;
  Param(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    value.assign(n, 0.0f);
    grad.assign(n, 0.0f);
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

// A differentiable layer. `forward` caches what `backward` needs; `infer` is
// the const, cache-free path that is safe for concurrent read-only use.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;
  // Returns dL/dx and accumulates dL/dparam into each trainable Param::grad.
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
};

// Square-kernel 2-D convolution via im2col + GEMM.
class Conv2d final : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, std::mt19937_64& rng)
      : in_(in_ch), out_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_("weight", {out_ch, in_ch, kernel, kernel}), bias_("bias", {out_ch}) {
    // He-normal for ReLU-family activations.
    std::normal_distribution<float> g(0.0f, std::sqrt(2.0f / static_cast<float>(in_ch * kernel * kernel)));
    for (float& v : weight_.value) v = g(rng);
  }

  Tensor forward(const Tensor& x) override {
    in_n_ = x.n;
    in_h_ = x.h;
    in_w_ = x.w;
    return run(x, &cols_);
  }

  Tensor infer(const Tensor& x) const override { return run(x, nullptr); }

  Tensor backward(const Tensor& dy) override {
    const int ho = dy.h;
    const int wo = dy.w;
    const int kk = in_ * k_ * k_;
    const int hw = ho * wo;
    Tensor dx(in_n_, in_, in_h_, in_w_);
    ConstMatMap wmat(weight_.value.data(), out_, kk);
    MatMap dw(weight_.grad.data(), out_, kk);
    FloatBuffer dcol(static_cast<std::size_t>(kk) * hw);
    for (int i = 0; i < dy.n; ++i) {
      ConstMatMap g(dy.sample(i), out_, hw);
      ConstMatMap col(cols_.data() + static_cast<std::size_t>(i) * kk * hw, kk, hw);
      if (weight_.trainable) {
        dw.noalias() += g * col.transpose();
        for (int o = 0; o < out_; ++o) bias_.grad[o] += g.row(o).sum();
      }
      MatMap dc(dcol.data(), kk, hw);
      dc.noalias() = wmat.transpose() * g;
      col2im(dcol.data(), dx.sample(i), in_h_, in_w_, ho, wo);
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string kind() const override { return "conv2d"; }

  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

 private:
  Tensor run(const Tensor& x, FloatBuffer* cache) const {
    if (x.c != in_) throw ShapeError("conv2d expects " + std::to_string(in_) + " channels, got " + x.shape_str());
    const int ho = out_size(x.h);
    const int wo = out_size(x.w);
    const int kk = in_ * k_ * k_;
    const int hw = ho * wo;
    Tensor y(x.n, out_, ho, wo);
    FloatBuffer local;
    FloatBuffer& cols = cache ? *cache : local;
    cols.resize(static_cast<std::size_t>(cache ? x.n : 1) * kk * hw);
    ConstMatMap wmat(weight_.value.data(), out_, kk);
    for (int i = 0; i < x.n; ++i) {
      float* col = cols.data() + (cache ? static_cast<std::size_t>(i) * kk * hw : 0);
      im2col(x.sample(i), col, x.h, x.w, ho, wo);
      MatMap out(y.sample(i), out_, hw);
      out.noalias() = wmat * ConstMatMap(col, kk, hw);
      for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
    }
    return y;
  }

  // Output columns [lo, hi) read an in-bounds input column for kernel offset kj.
  void valid_range(int kj, int w, int wo, int& lo, int& hi) const {
    lo = 0;
    while (lo < wo && lo * stride_ - pad_ + kj < 0) ++lo;
    hi = wo;
    while (hi > lo && (hi - 1) * stride_ - pad_ + kj >= w) --hi;
  }

  void im2col(const float* img, float* col, int h, int w, int ho, int wo) const {
    for (int c = 0; c < in_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj) {
          float* row = col + ((static_cast<std::size_t>(c) * k_ + ki) * k_ + kj) * ho * wo;
          int lo = 0;
          int hi = 0;
          valid_range(kj, w, wo, lo, hi);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            float* dst = row + static_cast<std::size_t>(oy) * wo;
            if (iy < 0 || iy >= h) {
              std::fill_n(dst, wo, 0.0f);
              continue;
            }
            const float* src = img + (static_cast<std::size_t>(c) * h + iy) * w - pad_ + kj;
            std::fill_n(dst, lo, 0.0f);
            if (stride_ == 1) {
              std::copy(src + lo, src + hi, dst + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride_];
            }
            std::fill(dst + hi, dst + wo, 0.0f);
          }
        }
      }
    }
  }

  void col2im(const float* col, float* img, int h, int w, int ho, int wo) const {
    std::fill_n(img, static_cast<std::size_t>(in_) * h * w, 0.0f);
    for (int c = 0; c < in_; ++c) {
      for (int ki = 0; ki < k_; ++ki) {
        for (int kj = 0; kj < k_; ++kj) {
          const float* row = col + ((static_cast<std::size_t>(c) * k_ + ki) * k_ + kj) * ho * wo;
          int lo = 0;
          int hi = 0;
          valid_range(kj, w, wo, lo, hi);
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ki;
            if (iy < 0 || iy >= h) continue;
            float* dst = img + (static_cast<std::size_t>(c) * h + iy) * w - pad_ + kj;
            const float* src = row + static_cast<std::size_t>(oy) * wo;
            if (stride_ == 1) {
              for (int ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) dst[ox * stride_] += src[ox];
            }
          }
        }
      }
    }
  }

  int in_, out_, k_, stride_, pad_;
  Param weight_;
  Param bias_;
  int in_n_ = 0, in_h_ = 0, in_w_ = 0;
  FloatBuffer cols_;
};

// Fully connected layer with Xavier-uniform initialization.
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, std::mt19937_64& rng)
      : in_(in_features), out_(out_features), weight_("weight", {out_features, in_features}),
        bias_("bias", {out_features}) {
    const float a = std::sqrt(6.0f / static_cast<float>(in_features + out_features));
    std::uniform_real_distribution<float> u(-a, a);
    for (float& v : weight_.value) v = u(rng);
  }

  Tensor forward(const Tensor& x) override {
    input_ = x;
    return infer(x);
  }

  Tensor infer(const Tensor& x) const override {
    if (static_cast<int>(x.sample_size()) != in_) {
      throw ShapeError("linear expects " + std::to_string(in_) + " inputs, got " + x.shape_str());
    }
    Tensor y(x.n, out_);
    ConstMatMap xm(x.data.data(), x.n, in_);
    ConstMatMap wm(weight_.value.data(), out_, in_);
    MatMap ym(y.data.data(), x.n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < x.n; ++i) {
      for (int o = 0; o < out_; ++o) ym(i, o) += bias_.value[o];
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    ConstMatMap g(dy.data.data(), dy.n, out_);
    ConstMatMap xm(input_.data.data(), input_.n, in_);
    if (weight_.trainable) {
      MatMap dw(weight_.grad.data(), out_, in_);
      dw.noalias() += g.transpose() * xm;
      for (int i = 0; i < dy.n; ++i) {
        for (int o = 0; o < out_; ++o) bias_.grad[o] += g(i, o);
      }
    }
    Tensor dx(input_.n, input_.c, input_.h, input_.w);
    MatMap dxm(dx.data.data(), input_.n, in_);
    ConstMatMap wm(weight_.value.data(), out_, in_);
    dxm.noalias() = g * wm;
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  std::string kind() const override { return "linear"; }

  Param& bias() { return bias_; }

 private:
  int in_, out_;
  Param weight_;
  Param bias_;
  Tensor input_;
};

// max(x, slope*x); slope 0 is a plain ReLU.
class LeakyRelu final : public Layer {
 public:
  explicit LeakyRelu(float slope = 0.0f) : slope_(slope) {}

  Tensor forward(const Tensor& x) override {
    input_ = x;
    return infer(x);
  }
  Tensor infer(const Tensor& x) const override {
    Tensor y = x;
    for (float& v : y.data) v = v > 0.0f ? v : slope_ * v;
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      if (!(input_.data[i] > 0.0f)) dx.data[i] *= slope_;
    }
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyRelu>(*this); }
  std::string kind() const override { return slope_ == 0.0f ? "relu" : "leaky_relu"; }

 private:
  float slope_;
  Tensor input_;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    output_ = infer(x);
    return output_;
  }
  Tensor infer(const Tensor& x) const override {
    Tensor y = x;
    for (float& v : y.data) v = 1.0f / (1.0f + std::exp(-v));
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= output_.data[i] * (1.0f - output_.data[i]);
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
  std::string kind() const override { return "sigmoid"; }

 private:
  Tensor output_;
};

class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    shape_ = Tensor(0, x.c, x.h, x.w);
    shape_.n = x.n;
    return infer(x);
  }
  Tensor infer(const Tensor& x) const override {
    Tensor y(x.n, x.c);
    const std::size_t p = x.plane();
    for (int i = 0; i < x.n; ++i) {
      for (int c = 0; c < x.c; ++c) {
        const float* src = x.sample(i) + c * p;
        float acc = 0.0f;
        for (std::size_t j = 0; j < p; ++j) acc += src[j];
        y.at(i, c) = acc / static_cast<float>(p);
      }
    }
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx(shape_.n, shape_.c, shape_.h, shape_.w);
    const std::size_t p = dx.plane();
    const float inv = 1.0f / static_cast<float>(p);
    for (int i = 0; i < dx.n; ++i) {
      for (int c = 0; c < dx.c; ++c) std::fill_n(dx.sample(i) + c * p, p, dy.at(i, c) * inv);
    }
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  std::string kind() const override { return "global_avg_pool"; }

 private:
  Tensor shape_;
};

// Nearest-neighbour 2x upsampling.
class Upsample2x final : public Layer {
 public:
  Tensor forward(const Tensor& x) override { return infer(x); }
  Tensor infer(const Tensor& x) const override {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    const std::size_t planes = static_cast<std::size_t>(x.n) * x.c;
    for (std::size_t p = 0; p < planes; ++p) {
      const float* src = x.data.data() + p * x.h * x.w;
      float* dst = y.data.data() + p * y.h * y.w;
      for (int r = 0; r < x.h; ++r) {
        float* d0 = dst + static_cast<std::size_t>(2 * r) * y.w;
        for (int q = 0; q < x.w; ++q) d0[2 * q] = d0[2 * q + 1] = src[r * x.w + q];
        std::copy(d0, d0 + y.w, d0 + y.w);
      }
    }
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    const std::size_t planes = static_cast<std::size_t>(dy.n) * dy.c;
    for (std::size_t p = 0; p < planes; ++p) {
      const float* src = dy.data.data() + p * dy.h * dy.w;
      float* dst = dx.data.data() + p * dx.h * dx.w;
      for (int r = 0; r < dy.h; ++r) {
        const float* s = src + static_cast<std::size_t>(r) * dy.w;
        float* d = dst + static_cast<std::size_t>(r / 2) * dx.w;
        for (int q = 0; q < dx.w; ++q) d[q] += s[2 * q] + s[2 * q + 1];
      }
    }
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample2x>(*this); }
  std::string kind() const override { return "upsample2x"; }
};

// Reinterprets (n, c*h*w) vectors as (n, c, h, w) maps.
class Reshape final : public Layer {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Tensor forward(const Tensor& x) override {
    in_c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
    return infer(x);
  }
  Tensor infer(const Tensor& x) const override {
    if (x.sample_size() != static_cast<std::size_t>(c_) * h_ * w_) throw ShapeError("reshape size mismatch");
    Tensor y = x;
    y.c = c_;
    y.h = h_;
    y.w = w_;
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    dx.c = in_c_;
    dx.h = in_h_;
    dx.w = in_w_;
    return dx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }
  std::string kind() const override { return "reshape"; }

 private:
  int c_, h_, w_;
  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

}  // namespace agex::nn
