#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "agex/core/error.hpp"
#include "agex/gan/networks.hpp"
#include "agex/models/age_model.hpp"
#include "agex/phantom/render.hpp"

namespace agex::gan {

// Signed pixelwise old - young.
struct DiffMap {
  int resolution = 0;
  std::vector<float> pixels;

  double abs_mass() const {
    double s = 0;
    for (float v : pixels) s += std::abs(v);
    return s;
  }
};

inline DiffMap difference_map(const GrayImage& young, const GrayImage& old) {
  if (young.resolution() != old.resolution()) {
    throw ShapeError("difference_map needs equal resolutions, got " + std::to_string(young.resolution()) + " and " +
                     std::to_string(old.resolution()));
  }
  DiffMap d{young.resolution(), std::vector<float>(young.size())};
  for (std::size_t i = 0; i < young.size(); ++i) d.pixels[i] = old.pixels()[i] - young.pixels()[i];
  return d;
}

inline std::vector<GrayImage> reage_sweep(const Generator& g, const LatentIdentity& w, std::span<const double> ages) {
  for (std::size_t i = 0; i < ages.size(); ++i) {
    check_age(ages[i]);
    if (i > 0 && ages[i] < ages[i - 1]) throw DomainError("sweep ages must be ascending");
  }
  std::vector<GrayImage> out;
  out.reserve(ages.size());
  for (double a : ages) out.push_back(g.generate(a, w));
  return out;
}

// Predictor estimates for G(a, w) over a grid of ages and latents;
// estimates[i][j] is for ages[i] and latent j.
struct TargetingCurve {
  std::vector<double> ages;
  std::vector<std::vector<double>> estimates;

  double mae() const {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ages.size(); ++i) {
      for (double e : estimates[i]) {
        s += std::abs(e - ages[i]);
        ++n;
      }
    }
    return n ? s / static_cast<double>(n) : 0.0;
  }

  double mean_estimate(std::size_t i) const {
    double s = 0;
    for (double e : estimates[i]) s += e;
    return s / static_cast<double>(estimates[i].size());
  }

  // Fraction of latents whose estimates never decrease along the age grid.
  double monotone_fraction() const {
    if (ages.empty() || estimates[0].empty()) return 0.0;
    const std::size_t nw = estimates[0].size();
    std::size_t ok = 0;
    for (std::size_t j = 0; j < nw; ++j) {
      bool mono = true;
      for (std::size_t i = 1; i < ages.size(); ++i) mono = mono && estimates[i][j] >= estimates[i - 1][j];
      ok += mono ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(nw);
  }
};

inline TargetingCurve targeting_curve(const Generator& g, const AgeModel& m, std::span<const double> ages,
                                      std::span<const LatentIdentity> ws) {
  if (m.resolution() != g.resolution()) throw ConfigError("predictor and generator resolutions differ");
  TargetingCurve c;
  c.ages.assign(ages.begin(), ages.end());
  for (double a : ages) {
    const std::vector<double> batch_ages(ws.size(), a);
    c.estimates.push_back(m.estimate_batch(g.infer(Generator::conditioning(batch_ages, ws))));
  }
  return c;
}

inline std::vector<LatentIdentity> latent_set(int n, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x1a7));
  std::vector<LatentIdentity> out;
  for (int i = 0; i < n; ++i) out.push_back(LatentIdentity::sample(rng));
  return out;
}

// Union of the renderer's age-sensitive masks over `n_identities` phantom
// identities. Generator latents have no phantom identity, so the reference is
// every pixel that is age-sensitive for some reference identity.
inline std::vector<std::uint8_t> union_age_mask(int n_identities, std::uint64_t seed, int resolution, double young,
                                                double old, double threshold = 0.01) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(resolution) * resolution, 0);
  for (int i = 0; i < n_identities; ++i) {
    const auto id = PhantomIdentity::from_seed(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto m = age_sensitive_mask(id, young, old, resolution, threshold);
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] |= m[k];
  }
  return mask;
}

inline double mask_coverage(std::span<const std::uint8_t> mask) {
  double s = 0;
  for (auto v : mask) s += v;
  return mask.empty() ? 0.0 : s / static_cast<double>(mask.size());
}

// Share of the map's absolute mass that falls on mask pixels (0 for an
// all-zero map).
inline double mass_inside(const DiffMap& d, std::span<const std::uint8_t> mask) {
  if (mask.size() != d.pixels.size()) throw ShapeError("mask and difference map differ in size");
  double in = 0;
  double total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double a = std::abs(d.pixels[i]);
    total += a;
    if (mask[i]) in += a;
  }
  return total > 0.0 ? in / total : 0.0;
}

// Real-vs-fake accuracy of the discriminator (logit > 0 means real).
inline double discriminator_accuracy(const Discriminator& d, const nn::Tensor& real, const nn::Tensor& fake) {
  int hits = 0;
  const nn::Tensor lr = d.infer(real);
  const nn::Tensor lf = d.infer(fake);
  for (float z : lr.data) hits += z > 0.0f ? 1 : 0;
  for (float z : lf.data) hits += z < 0.0f ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(real.n + fake.n);
}

}  // namespace agex::gan
