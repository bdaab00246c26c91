#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/nn/tensor.hpp"

namespace agex::nn {

struct LossGrad {
  double loss = 0;
  Tensor grad;  // dL/d(input), same shape as the input
};

// Mean over the batch of (pred - target)^2 for (n, 1) predictions.
inline LossGrad mse(const Tensor& pred, std::span<const float> target) {
  if (pred.sample_size() != 1 || target.size() != static_cast<std::size_t>(pred.n)) {
    throw ShapeError("mse expects (n,1) predictions and n targets");
  }
  LossGrad out{0.0, Tensor(pred.n, 1)};
  const double inv = 1.0 / pred.n;
  for (int i = 0; i < pred.n; ++i) {
    const double d = static_cast<double>(pred.data[i]) - target[i];
    out.loss += d * d * inv;
    out.grad.data[i] = static_cast<float>(2.0 * d * inv);
  }
  return out;
}

// Numerically stable log(1 + exp(x)).
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Softmax cross-entropy against (possibly soft) target distributions, mean over
// the batch. `targets` is row-major n x k.
inline LossGrad softmax_cross_entropy(const Tensor& logits, std::span<const float> targets) {
  const int k = static_cast<int>(logits.sample_size());
  if (targets.size() != logits.size()) throw ShapeError("softmax_cross_entropy target size mismatch");
  LossGrad out{0.0, Tensor(logits.n, k)};
  const double inv = 1.0 / logits.n;
  std::vector<double> p(k);
  for (int i = 0; i < logits.n; ++i) {
    const float* z = logits.sample(i);
    const double zmax = *std::max_element(z, z + k);
    double sum = 0;
    for (int j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
    const double log_sum = std::log(sum) + zmax;
    for (int j = 0; j < k; ++j) {
      p[j] = std::exp(z[j] - log_sum);
      const double t = targets[static_cast<std::size_t>(i) * k + j];
      if (t > 0) out.loss -= t * (z[j] - log_sum) * inv;
      out.grad.sample(i)[j] = static_cast<float>((p[j] - t) * inv);
    }
  }
  return out;
}

// Independent sigmoid binary cross-entropies against soft targets in [0,1];
// summed over outputs, mean over the batch.
inline LossGrad sigmoid_bce(const Tensor& logits, std::span<const float> targets) {
  if (targets.size() != logits.size()) throw ShapeError("sigmoid_bce target size mismatch");
  LossGrad out{0.0, Tensor(logits.n, logits.c, logits.h, logits.w)};
  const double inv = 1.0 / logits.n;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.data[i];
    const double t = targets[i];
    // -[t log s(z) + (1-t) log(1-s(z))] = softplus(z) - t z
    out.loss += (softplus(z) - t * z) * inv;
    out.grad.data[i] = static_cast<float>((sigmoid(z) - t) * inv);
  }
  return out;
}

inline std::vector<float> softmax(std::span<const float> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0;
  std::vector<double> e(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) sum += (e[j] = std::exp(z[j] - zmax));
  std::vector<float> p(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) p[j] = static_cast<float>(e[j] / sum);
  return p;
}

}  // namespace agex::nn
