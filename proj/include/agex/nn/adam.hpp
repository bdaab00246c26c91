#pragma once

#include <cmath>
#include <vector>

#include "agex/nn/layers.hpp"

namespace agex::nn {

// Adam (Kingma & Ba) with bias correction. Holds moment buffers for a fixed
// list of parameters; the learning rate is set per step by the scheduler.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Param* p : params_) {
      m_.emplace_back(p->value.size(), 0.0f);
      v_.emplace_back(p->value.size(), 0.0f);
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float b1 = static_cast<float>(beta1_);
    const float b2 = static_cast<float>(beta2_);
    const float step_size = static_cast<float>(lr * std::sqrt(c2) / c1);
    const float eps = static_cast<float>(eps_ * std::sqrt(c2));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param& p = *params_[k];
      if (!p.trainable) continue;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

  long long steps() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace agex::nn
