#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/gan/networks.hpp"
#include "agex/models/age_model.hpp"
#include "agex/nn/adam.hpp"
#include "agex/nn/loss.hpp"

namespace agex::gan {

// lambda * (A - predicted)^2 in the caller's units (years gives years^2).
inline double age_consistency_loss(double target_age, double predicted_age, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  const double e = target_age - predicted_age;
  return lambda * e * e;
}

struct GanConfig {
  int resolution = 64;
  int steps = 20000;
  int batch_size = 16;
  // Weight of the age term, applied to ages divided by 105.
  double lambda = 0.05;
  double lr = 2e-4;
  double beta1 = 0.5;
  double age_lo = 15.0;
  double age_hi = 95.0;
  std::uint64_t seed = 0;
  GeneratorConfig generator{};
  std::vector<int> discriminator_channels{16, 32, 64, 128};
  int log_every = 100;
  // Abort when the discriminator loss stays below this for `divergence_window`
  // consecutive steps (the generator has stopped producing useful gradients).
  double divergence_threshold = 1e-4;
  int divergence_window = 500;

  void validate() const {
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(age_lo >= 0.0 && age_lo < age_hi && age_hi <= kMaxAgeYears)) throw ConfigError("bad age range");
    if (log_every < 1) throw ConfigError("log_every must be >= 1");
    if (generator.resolution != resolution) throw ConfigError("generator resolution differs from GAN resolution");
    generator.validate();
  }

  nlohmann::json to_json() const {
    return {{"resolution", resolution},
            {"steps", steps},
            {"batch_size", batch_size},
            {"lambda", lambda},
            {"lr", lr},
            {"beta1", beta1},
            {"age_lo", age_lo},
            {"age_hi", age_hi},
            {"seed", seed},
            {"generator", generator.to_json()},
            {"discriminator_channels", discriminator_channels},
            {"log_every", log_every}};
  }
};

// Means over the `log_every` steps ending at `step`.
struct GanCurvePoint {
  int step = 0;
  double d_loss = 0;
  double g_adv = 0;
  double g_age = 0;
  double d_accuracy = 0;
  double batch_age_mae = 0;
};

struct GanBatchLoss {
  double d_real = 0;  // mean softplus(-D(x))
  double d_fake = 0;  // mean softplus(D(G))
  double g_adv = 0;   // mean softplus(-D(G)), non-saturating
  double g_age = 0;   // lambda * mean((A - M(G))/105)^2
  double lambda = 0;
  double d_accuracy = 0;
  double age_mae = 0;  // years, on the generator batch
  // Largest |d g_age / d image| seen in the step; exactly 0 when lambda is 0.
  double age_grad_max = 0;
};

// Owns G, D and a private copy of the frozen predictor M. M's parameters are
// marked non-trainable and never handed to an optimizer.
class AcGanTrainer {
 public:
  AcGanTrainer(GanConfig config, const AgeModel& predictor)
      : cfg_((config.validate(), std::move(config))),
        g_(cfg_.generator, derive_seed(cfg_.seed, 1)),
        d_(BackboneConfig{cfg_.resolution, cfg_.discriminator_channels}, derive_seed(cfg_.seed, 2)),
        m_(predictor),
        g_opt_(g_.params(), cfg_.beta1, 0.999),
        d_opt_(d_.params(), cfg_.beta1, 0.999),
        rng_(derive_seed(cfg_.seed, 3)) {
    if (predictor.resolution() != cfg_.resolution) {
      throw ConfigError("predictor resolution " + std::to_string(predictor.resolution()) +
                        " differs from GAN resolution " + std::to_string(cfg_.resolution));
    }
    m_.set_trainable(false);
  }

  const GanConfig& config() const { return cfg_; }
  Generator& generator() { return g_; }
  const Generator& generator() const { return g_; }
  Discriminator& discriminator() { return d_; }
  const AgeModel& predictor() const { return m_; }

  // Samples the conditioning for one generator batch.
  void sample_conditioning(std::vector<double>& ages, std::vector<LatentIdentity>& ws) {
    std::uniform_real_distribution<double> age(cfg_.age_lo, cfg_.age_hi);
    ages.resize(cfg_.batch_size);
    ws.resize(cfg_.batch_size);
    for (int i = 0; i < cfg_.batch_size; ++i) {
      ages[i] = age(rng_);
      ws[i] = LatentIdentity::sample(rng_);
    }
  }

  GanBatchLoss discriminator_step(const nn::Tensor& real) {
    std::vector<double> ages;
    std::vector<LatentIdentity> ws;
    sample_conditioning(ages, ws);
    const nn::Tensor fake = g_.infer(Generator::conditioning(ages, ws));
    const nn::Tensor both = nn::concat_batch(real, fake);
    std::vector<float> labels(both.n, 0.0f);
    std::fill(labels.begin(), labels.begin() + real.n, 1.0f);

    d_.set_trainable(true);
    d_opt_.zero_grad();
    const nn::Tensor logits = d_.forward(both);
    nn::LossGrad lg = nn::sigmoid_bce(logits, labels);
    if (!std::isfinite(lg.loss)) throw NumericError("non-finite discriminator loss at step " + std::to_string(step_));
    d_.backward(lg.grad);
    d_opt_.step(cfg_.lr);

    GanBatchLoss out;
    out.lambda = cfg_.lambda;
    int hits = 0;
    for (int i = 0; i < both.n; ++i) {
      const double z = logits.data[i];
      if (i < real.n) {
        out.d_real += nn::softplus(-z);
        hits += z > 0.0 ? 1 : 0;
      } else {
        out.d_fake += nn::softplus(z);
        hits += z < 0.0 ? 1 : 0;
      }
    }
    out.d_real /= real.n;
    out.d_fake /= fake.n;
    out.d_accuracy = static_cast<double>(hits) / both.n;
    return out;
  }

  // One generator update. With `age_term` false the predictor is not
  // consulted at all (the unconditional objective).
  GanBatchLoss generator_step(bool age_term = true) {
    std::vector<double> ages;
    std::vector<LatentIdentity> ws;
    sample_conditioning(ages, ws);
    return generator_step(ages, ws, age_term);
  }

  GanBatchLoss generator_step(const std::vector<double>& ages, const std::vector<LatentIdentity>& ws,
                              bool age_term = true) {
    GanBatchLoss out;
    out.lambda = cfg_.lambda;
    g_opt_.zero_grad();
    const nn::Tensor fake = g_.forward(Generator::conditioning(ages, ws));
    const int n = fake.n;

    d_.set_trainable(false);
    const nn::Tensor logits = d_.forward(fake);
    nn::Tensor dlogit(n, 1, 1, 1);
    for (int i = 0; i < n; ++i) {
      out.g_adv += nn::softplus(-logits.data[i]);
      dlogit.data[i] = static_cast<float>((nn::sigmoid(logits.data[i]) - 1.0) / n);
    }
    out.g_adv /= n;
    nn::Tensor dfake = d_.backward(dlogit);

    if (age_term) {
      const nn::Tensor m_out = m_.forward(fake);
      const std::vector<double> pred = m_.ages_from_output(m_out);
      std::vector<double> d_age(n);
      const double scale = 1.0 / (kMaxAgeYears * kMaxAgeYears);
      for (int i = 0; i < n; ++i) {
        const double e = pred[i] - ages[i];
        out.g_age += cfg_.lambda * e * e * scale;
        out.age_mae += std::abs(e);
        d_age[i] = cfg_.lambda * 2.0 * e * scale / n;
      }
      out.g_age /= n;
      out.age_mae /= n;
      const nn::Tensor dimg = m_.backward(m_.output_grad(m_out, d_age));
      for (std::size_t i = 0; i < dimg.data.size(); ++i) {
        out.age_grad_max = std::max(out.age_grad_max, static_cast<double>(std::abs(dimg.data[i])));
        dfake.data[i] += dimg.data[i];
      }
    }
    if (!std::isfinite(out.g_adv) || !std::isfinite(out.g_age)) {
      throw NumericError("non-finite generator loss at step " + std::to_string(step_));
    }
    g_.backward(dfake);
    g_opt_.step(cfg_.lr);
    return out;
  }

  // Alternating D/G step on one real batch; also runs the divergence check.
  GanBatchLoss step(const nn::Tensor& real) {
    GanBatchLoss d = discriminator_step(real);
    GanBatchLoss g = generator_step(true);
    g.d_real = d.d_real;
    g.d_fake = d.d_fake;
    g.d_accuracy = d.d_accuracy;
    const double d_loss = 0.5 * (d.d_real + d.d_fake);
    low_d_streak_ = d_loss < cfg_.divergence_threshold ? low_d_streak_ + 1 : 0;
    if (low_d_streak_ >= cfg_.divergence_window) {
      throw NumericError("GAN diverged at step " + std::to_string(step_) + ": discriminator loss below " +
                         std::to_string(cfg_.divergence_threshold) + " for " +
                         std::to_string(cfg_.divergence_window) +
                         " steps (generator collapsed); try a lower lr or smaller lambda");
    }
    ++step_;
    return g;
  }

  int steps_done() const { return step_; }

 private:
  GanConfig cfg_;
  Generator g_;
  Discriminator d_;
  AgeModel m_;
  nn::Adam g_opt_;
  nn::Adam d_opt_;
  std::mt19937_64 rng_;
  int step_ = 0;
  int low_d_streak_ = 0;
};

struct GanTrainResult {
  Generator generator;
  Discriminator discriminator;
  std::vector<GanCurvePoint> curves;
};

inline std::string curves_to_csv(const std::vector<GanCurvePoint>& curves) {
  std::string s = "step,d_loss,g_adv,g_age,d_accuracy,batch_age_mae\n";
  char buf[200];
  for (const auto& c : curves) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.8f,%.4f,%.4f\n", c.step, c.d_loss, c.g_adv, c.g_age, c.d_accuracy,
                  c.batch_age_mae);
    s += buf;
  }
  return s;
}

using GanProgress = std::function<void(const GanCurvePoint&)>;

// `images` holds the real training images (N x 1 x R x R, values in [0,1]).
// The caller's predictor is never modified.
inline GanTrainResult train_acgan(const GanConfig& config, const nn::Tensor& images, const AgeModel& predictor,
                                  const GanProgress& progress = {}) {
  config.validate();
  if (images.n < 1) throw ConfigError("GAN training set is empty");
  if (images.h != config.resolution || images.w != config.resolution || images.c != 1) {
    throw ShapeError("GAN training images are " + images.shape_str() + ", expected " +
                     std::to_string(config.resolution) + "^2 grayscale");
  }
  AcGanTrainer trainer(config, predictor);
  std::mt19937_64 rng(derive_seed(config.seed, 4));
  std::vector<int> order(images.n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<int> rows;
  std::vector<GanCurvePoint> curves;
  GanCurvePoint acc;
  int in_window = 0;
  for (int s = 0; s < config.steps; ++s) {
    rows.clear();
    while (static_cast<int>(rows.size()) < config.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    const GanBatchLoss l = trainer.step(nn::gather(images, rows));
    acc.d_loss += 0.5 * (l.d_real + l.d_fake);
    acc.g_adv += l.g_adv;
    acc.g_age += l.g_age;
    acc.d_accuracy += l.d_accuracy;
    acc.batch_age_mae += l.age_mae;
    if (++in_window == config.log_every || s + 1 == config.steps) {
      const double k = in_window;
      curves.push_back({s + 1, acc.d_loss / k, acc.g_adv / k, acc.g_age / k, acc.d_accuracy / k,
                        acc.batch_age_mae / k});
      if (progress) progress(curves.back());
      acc = {};
      in_window = 0;
    }
  }
  return {trainer.generator(), trainer.discriminator(), std::move(curves)};
}

}  // namespace agex::gan
