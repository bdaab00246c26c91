#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/core/hash.hpp"
#include "agex/phantom/identity.hpp"
#include "agex/phantom/image.hpp"
#include "agex/phantom/params.hpp"

namespace agex {

struct RenderConfig {
  // Sd of the additive white noise.
  double noise_sd = 0.02;
  // Per-image "pathology" jitter of the cardiac and mediastinal outline that
  // grows linearly with age; 0 disables it. Makes age errors heteroscedastic.
  double abnormality_scale = 1.0;
};

inline bool is_supported_resolution(int resolution) {
  return resolution == 32 || resolution == 64 || resolution == 128 || resolution == 256;
}

namespace detail {

// Signed distance (negative inside) to an axis-aligned ellipse, first-order
// approximation that is exact on the boundary.
inline double ellipse_sd(double x, double y, double cx, double cy, double a, double b) {
  const double dx = x - cx;
  const double dy = y - cy;
  const double q = std::sqrt((dx * dx) / (a * a) + (dy * dy) / (b * b));
  if (q < 1e-12) return -std::min(a, b);
  const double gx = dx / (a * a);
  const double gy = dy / (b * b);
  const double grad = std::sqrt(gx * gx + gy * gy) / q;
  return (q - 1.0) / grad;
}

inline double box_sd(double x, double y, double x0, double x1, double y0, double y1) {
  return std::max({x0 - x, x - x1, y0 - y, y - y1});
}

// Fraction of a pixel covered by a shape whose edge lies at signed distance sd.
inline double coverage(double sd, double pixel) { return std::clamp(0.5 - sd / pixel, 0.0, 1.0); }

inline double lerp(double base, double value, double alpha) { return base + (value - base) * alpha; }

inline GrayImage rasterize(const PhantomIdentity& identity, const PhantomParams& p, int resolution,
                           double heart_jitter = 0.0, double mediastinum_jitter = 0.0) {
  const auto& u = identity.traits;
  const double px = 1.0 / resolution;

  const double density = u[7] - 0.5;
  const double body_val = 0.38 + 0.06 * density;
  const double lung_val = 0.12 + 0.04 * density;
  const double rib_gain = 0.10;
  const double rib_phase = 0.012 * (u[4] - 0.5);

  const double rib_a = p.ribcage_width_frac / 2.0;
  const double rib_cx = 0.5;
  const double rib_cy = 0.50;
  const double rib_b = 0.38;

  const double heart_cx = 0.52 + 0.03 * (u[6] - 0.5);
  const double heart_a = (p.heart_width_frac + heart_jitter) / 2.0;
  const double heart_b = 0.13 + 0.03 * (u[5] - 0.5);

  const double med_half = (p.mediastinum_width_frac + mediastinum_jitter) / 2.0;
  const double arch_cx = 0.5 + med_half - 0.01;
  const double arch_cy = 0.25;
  const double arch_a = p.aortic_arch_width_frac / 2.0;
  const double arch_b = 0.04;

  const double apex_y = 0.19;
  const double apex_dx = p.ribcage_width_frac * 0.27;
  const double apex_sigma = 0.05;

  GrayImage img(resolution);
  for (int r = 0; r < resolution; ++r) {
    const double y = (r + 0.5) * px;
    for (int c = 0; c < resolution; ++c) {
      const double x = (c + 0.5) * px;

      double v = 0.0;
      v = lerp(v, body_val, coverage(ellipse_sd(x, y, 0.5, 0.56, 0.52, 0.58), px));

      const double dome = 0.83 + 0.04 * std::pow(std::abs(x - 0.5) / 0.45, 2.0);
      const double below_dome = coverage(dome - y, px);
      const double lung = coverage(ellipse_sd(x, y, rib_cx, rib_cy, rib_a, rib_b), px) * (1.0 - below_dome);
      v = lerp(v, lung_val, lung);

      if (lung > 0.0) {
        const double lateral = std::min(std::abs(x - 0.5) / rib_a, 1.0);
        double rib = 0.0;
        for (int k = 0; k < 8; ++k) {
          const double centre = 0.17 + 0.075 * k + rib_phase + 0.05 * lateral * lateral;
          rib = std::max(rib, coverage(std::abs(y - centre) - 0.009, px));
        }
        v += rib_gain * rib * lung;

        const double dl = (x - (0.5 - apex_dx)) * (x - (0.5 - apex_dx)) + (y - apex_y) * (y - apex_y);
        const double dr = (x - (0.5 + apex_dx)) * (x - (0.5 + apex_dx)) + (y - apex_y) * (y - apex_y);
        const double shadow = std::exp(-dl / (2 * apex_sigma * apex_sigma)) +
                              std::exp(-dr / (2 * apex_sigma * apex_sigma));
        v += 0.5 * p.apical_shadow_opacity * shadow * lung;
      }

      const double body = coverage(ellipse_sd(x, y, 0.5, 0.56, 0.52, 0.58), px);
      v = lerp(v, 0.55, below_dome * body);
      v = lerp(v, 0.70, coverage(box_sd(x, y, 0.5 - med_half, 0.5 + med_half, 0.08, p.heart_center_y_frac), px));
      v = lerp(v, 0.74, coverage(ellipse_sd(x, y, arch_cx, arch_cy, arch_a, arch_b), px));
      v = lerp(v, 0.78, coverage(ellipse_sd(x, y, heart_cx, p.heart_center_y_frac, heart_a, heart_b), px));

      img.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace detail

// Noise-free rendering of the phantom geometry.
inline GrayImage render_clean(const PhantomIdentity& identity, double age_years, int resolution) {
  if (!is_supported_resolution(resolution)) {
    throw DomainError("unsupported phantom resolution " + std::to_string(resolution));
  }
  return detail::rasterize(identity, phantom_params(identity, age_years), resolution);
}

inline GrayImage render_phantom(const PhantomIdentity& identity, double age_years, int resolution,
                                std::uint64_t noise_seed, const RenderConfig& config = {}) {
  if (!is_supported_resolution(resolution)) {
    throw DomainError("unsupported phantom resolution " + std::to_string(resolution));
  }
  const PhantomParams params = phantom_params(identity, age_years);
  std::mt19937_64 rng(derive_seed(noise_seed, 0x5eed));
  std::normal_distribution<double> gauss(0.0, 1.0);

  double heart_jitter = 0.0;
  double med_jitter = 0.0;
  if (config.abnormality_scale > 0.0) {
    const double t = age_years / kMaxAgeYears;
    heart_jitter = config.abnormality_scale * t * 0.05 * gauss(rng);
    med_jitter = config.abnormality_scale * t * 0.04 * gauss(rng);
    heart_jitter = std::max(heart_jitter, 0.02 - params.heart_width_frac);
    med_jitter = std::max(med_jitter, 0.02 - params.mediastinum_width_frac);
  }
  GrayImage img = detail::rasterize(identity, params, resolution, heart_jitter, med_jitter);
  if (config.noise_sd > 0.0) {
    for (float& v : img.pixels()) {
      v = static_cast<float>(std::clamp(v + config.noise_sd * gauss(rng), 0.0, 1.0));
    }
  }
  return img;
}

// Pixels whose noise-free intensity changes by more than `threshold` between
// the two ages for this identity.
inline std::vector<std::uint8_t> age_sensitive_mask(const PhantomIdentity& identity, double young, double old,
                                                    int resolution, double threshold = 0.01) {
  const GrayImage a = render_clean(identity, young, resolution);
  const GrayImage b = render_clean(identity, old, resolution);
  std::vector<std::uint8_t> mask(a.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    mask[i] = std::abs(b.pixels()[i] - a.pixels()[i]) > threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace agex
