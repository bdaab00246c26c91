#pragma once

#include <cmath>
#include <span>

#include "agex/core/error.hpp"

namespace agex::stats {

class SingularFitError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct LogFit {
  double a = 0;
  double b = 0;
  double rmse = 0;

  double operator()(double n) const { return a + b * std::log(n); }
};

// Least squares MAE = a + b ln N.
inline LogFit log_fit(std::span<const double> ns, std::span<const double> maes) {
  if (ns.size() != maes.size()) throw DomainError("ns and maes differ in length");
  if (ns.size() < 2) throw DomainError("log_fit needs at least two points");
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] >= 1.0)) throw DomainError("dataset sizes must be >= 1");
    mx += std::log(ns[i]);
    my += maes[i];
  }
  const double n = static_cast<double>(ns.size());
  mx /= n;
  my /= n;
  double sxx = 0;
  double sxy = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(ns[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (maes[i] - my);
  }
  if (sxx <= 0.0) throw SingularFitError("log_fit needs at least two distinct dataset sizes");
  LogFit f;
  f.b = sxy / sxx;
  f.a = my - f.b * mx;
  double ss = 0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double r = maes[i] - f(ns[i]);
    ss += r * r;
  }
  f.rmse = std::sqrt(ss / n);
  return f;
}

}  // namespace agex::stats
