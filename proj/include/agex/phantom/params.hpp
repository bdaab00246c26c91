#pragma once

#include <algorithm>
#include <string>

#include "agex/core/error.hpp"
#include "agex/phantom/identity.hpp"

namespace agex {

inline constexpr double kMaxAgeYears = 105.0;

// Anatomical geometry of one phantom, as fractions of the image side.
struct PhantomParams {
  double aortic_arch_width_frac = 0;
  double heart_width_frac = 0;
  double heart_center_y_frac = 0;
  double ribcage_width_frac = 0;
  double mediastinum_width_frac = 0;
  double apical_shadow_opacity = 0;
};

inline void check_age(double age_years) {
  if (!(age_years >= 0.0 && age_years <= kMaxAgeYears)) {
    throw DomainError("age " + std::to_string(age_years) + " outside [0,105]");
  }
}

// Age-coupled anatomy: the aortic arch, heart, and mediastinum widen, the heart
// drops, the ribcage narrows, and apical shadowing grows with age.
inline PhantomParams phantom_params(const PhantomIdentity& identity, double age_years) {
  check_age(age_years);
  const double t = age_years / kMaxAgeYears;
  const auto& u = identity.traits;
  PhantomParams p;
  p.aortic_arch_width_frac = (0.06 + 0.10 * t) * (0.9 + 0.2 * u[0]);
  p.heart_width_frac = 0.28 + 0.10 * t + 0.04 * (u[1] - 0.5);
  p.heart_center_y_frac = 0.55 + 0.06 * t;
  p.ribcage_width_frac = 0.92 - 0.06 * t + 0.02 * (u[2] - 0.5);
  p.mediastinum_width_frac = 0.18 + 0.08 * t;
  p.apical_shadow_opacity = std::clamp(0.05 + 0.25 * t * u[3], 0.0, 1.0);
  return p;
}

}  // namespace agex
