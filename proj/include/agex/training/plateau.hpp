#pragma once

#include <cmath>
#include <limits>

#include "agex/core/error.hpp"

namespace agex {

// Reduce-on-plateau learning-rate schedule. A call whose metric is strictly
// below the best seen so far resets the stall counter; after `patience`
// consecutive non-improving calls the rate is multiplied by `factor` and the
// counter resets.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor, int patience)
      : initial_lr_(initial_lr), factor_(factor), patience_(patience) {
    if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must lie in (0,1)");
    if (patience < 1) throw ConfigError("plateau patience must be >= 1");
  }

  double step(double metric) {
    if (!std::isfinite(metric)) throw DomainError("plateau metric must be finite");
    if (metric < best_) {
      best_ = metric;
      stall_ = 0;
    } else if (++stall_ >= patience_) {
      ++decays_;
      stall_ = 0;
    }
    return lr();
  }

  double lr() const { return initial_lr_ * std::pow(factor_, decays_); }
  int decays() const { return decays_; }
  int stall() const { return stall_; }
  double best() const { return best_; }

 private:
  double initial_lr_;
  double factor_;
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int stall_ = 0;
  int decays_ = 0;
};

}  // namespace agex
