#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "conic_scatter/errors.hpp"

namespace conic_scatter {

/// Least-squares line through (log h, log error).
struct RateFit {
  std::vector<double> h_values;
  std::vector<double> errors;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();

  /// False when some error is zero or non-finite; slope, intercept and r2 are NaN then.
  bool valid() const { return std::isfinite(slope); }
};

inline RateFit fit_rate(std::vector<double> h_values, std::vector<double> errors) {
  require(h_values.size() == errors.size(), ErrorKind::invalid_input, "rate fit needs matching h and error lists");
  require(h_values.size() >= 2, ErrorKind::invalid_input, "rate fit needs at least two points");
  RateFit fit{std::move(h_values), std::move(errors)};
  const std::size_t n = fit.h_values.size();
  for (std::size_t i = 0; i < n; ++i) {
    require(fit.h_values[i] > 0.0 && std::isfinite(fit.h_values[i]), ErrorKind::invalid_input, "h must be positive");
    if (!(fit.errors[i] > 0.0) || !std::isfinite(fit.errors[i])) return fit;
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += std::log(fit.h_values[i]);
    sy += std::log(fit.errors[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(fit.h_values[i]) - mx, dy = std::log(fit.errors[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0.0, ErrorKind::degenerate, "rate fit needs distinct h values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace conic_scatter
