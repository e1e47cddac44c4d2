#pragma once

// Wave-front sets of grid functions on the circle, detected by coherent-state
// testing: a point (theta, sign) is singular when the overlap with Gaussian
// packets at theta with frequency sign/h decays slower than h^decay_orders.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "conic_scatter/errors.hpp"
#include "conic_scatter/fft.hpp"
#include "conic_scatter/parallel.hpp"
#include "conic_scatter/phase_geometry.hpp"
#include "conic_scatter/radial_smatrix.hpp"
#include "conic_scatter/rate_fit.hpp"

namespace conic_scatter {

using Complex = std::complex<double>;

/// Signed FFT frequency of slot k in an n-point transform, in (-n/2, n/2].
inline long signed_frequency(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Periodized Gaussian exp(-(theta - theta0)^2 / (2 width^2 h)) e^{i m0 (theta - theta0)/h},
/// normalized to unit L^2 norm on the grid (measure 2 pi / n).
struct CoherentProbe {
  double theta0 = 0.0;
  double m0 = 1.0;
  double h = 0.125;
  double width = 1.0;

  /// Fourier coefficients in FFT slot order.
  std::vector<Complex> coefficients(std::size_t n) const {
    require(h > 0.0 && h <= 1.0, ErrorKind::invalid_input, "probe scale h must lie in (0, 1]");
    require(width > 0.0 && std::isfinite(width), ErrorKind::invalid_input, "probe width must be positive");
    std::vector<Complex> p(n);
    const double centre = m0 / h;
    const double s2 = width * width * h;
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double m = static_cast<double>(signed_frequency(k, n));
      const double g = std::exp(-0.5 * s2 * (m - centre) * (m - centre));
      p[k] = std::polar(g, -m * theta0);
      norm += g * g;
    }
    require(norm > 0.0, ErrorKind::coverage, "probe has no support on the grid");
    const double scale = 1.0 / std::sqrt(two_pi * norm);
    for (auto& z : p) z *= scale;
    return p;
  }

  std::vector<Complex> samples(std::size_t n) const {
    FourierTransform fft(n);
    return fft.synthesize(coefficients(n));
  }
};

/// Probes at every grid angle, both frequency directions, and the scales in h_values.
struct ProbeGrid {
  std::vector<double> h_values{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  double width = 1.0;
  double m0 = 1.0;
  /// Overlaps below relative_floor * ||u|| count as numerically zero.
  double relative_floor = 1e-9;

  /// Throws a coverage error unless the finest probe fits below Nyquist with
  /// eight frequency widths to spare and the coarsest probe is localized.
  void check(std::size_t n) const {
    require(h_values.size() >= 3, ErrorKind::invalid_input, "need at least three probe scales");
    require(width > 0.0 && m0 > 0.0, ErrorKind::invalid_input, "probe width and frequency must be positive");
    const auto [lo, hi] = std::minmax_element(h_values.begin(), h_values.end());
    require(*lo > 0.0 && *hi <= 1.0, ErrorKind::invalid_input, "probe scales must lie in (0, 1]");
    require(width * std::sqrt(*hi) <= 1.0, ErrorKind::coverage, "coarsest probe is not localized on the circle");
    const double reach = m0 / *lo + 8.0 / (width * std::sqrt(*lo));
    require(reach <= 0.5 * static_cast<double>(n), ErrorKind::coverage,
            "grid of " + std::to_string(n) + " points cannot resolve the finest probe");
  }
};

struct Detection {
  double theta = 0.0;
  int direction = 1;
  double mass = 0.0;
  double slope = 0.0;
};

struct WFReport {
  std::vector<Detection> detections;
  double threshold = 4.0;
  double mass_floor = 0.0;
  std::vector<double> h_slopes;
};

namespace detail {

/// |<probe(theta_j, dir, h), u>| for all grid angles theta_j at once.
inline std::vector<double> overlap_masses(std::span<const Complex> c, const ProbeGrid& grid, double h, int dir) {
  const std::size_t n = c.size();
  const auto p = CoherentProbe{0.0, dir * grid.m0, h, grid.width}.coefficients(n);
  std::vector<Complex> prod(n);
  for (std::size_t k = 0; k < n; ++k) prod[k] = two_pi * std::conj(p[k]) * c[k];
  FourierTransform fft(n);
  const auto v = fft.synthesize(prod);
  std::vector<double> mass(n);
  for (std::size_t j = 0; j < n; ++j) mass[j] = std::abs(v[j]);
  return mass;
}

}  // namespace detail

/// Classifies every (theta_j, +-) and clusters contiguous singular cells into
/// one detection located at the finest-scale mass peak.
inline WFReport detect_wavefront(std::span<const Complex> u, const ProbeGrid& grid = {}, double decay_orders = 4.0) {
  const std::size_t n = u.size();
  require(n >= 16, ErrorKind::invalid_input, "grid function needs at least 16 points");
  require(decay_orders > 0.0, ErrorKind::invalid_input, "decay threshold must be positive");
  grid.check(n);
  for (const auto& z : u) require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorKind::invalid_input,
                                  "grid function must be finite");
  FourierTransform fft(n);
  const auto c = fft.coefficients(u);
  double energy = 0.0;
  for (const auto& z : c) energy += std::norm(z);
  const double u_norm = std::sqrt(two_pi * energy);

  WFReport report;
  report.threshold = decay_orders;
  report.mass_floor = grid.relative_floor * u_norm;
  if (u_norm == 0.0) return report;

  const std::size_t nh = grid.h_values.size();
  std::size_t finest = 0;
  for (std::size_t i = 1; i < nh; ++i)
    if (grid.h_values[i] < grid.h_values[finest]) finest = i;

  // masses[d * nh + i][j]: direction d (0 -> +, 1 -> -), scale i, angle j
  std::vector<std::vector<double>> masses(2 * nh);
  parallel_for(masses.size(), [&](std::size_t task) {
    const int dir = task < nh ? 1 : -1;
    masses[task] = detail::overlap_masses(c, grid, grid.h_values[task % nh], dir);
  });

  for (int d = 0; d < 2; ++d) {
    const int dir = d == 0 ? 1 : -1;
    const auto& fine = masses[d * nh + finest];
    std::vector<char> singular(n, 0);
    std::vector<double> slope(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (fine[j] < report.mass_floor) continue;
      std::vector<double> m(nh);
      for (std::size_t i = 0; i < nh; ++i) m[i] = masses[d * nh + i][j];
      const auto fit = fit_rate(grid.h_values, m);
      slope[j] = fit.slope;
      singular[j] = fit.valid() && fit.slope < decay_orders;
    }
    // start the circular scan at a regular cell so runs are not split
    std::size_t start = 0;
    while (start < n && singular[start]) ++start;
    const bool everywhere = start == n;
    if (everywhere) start = 0;
    std::size_t j = 0;
    while (j < n) {
      const std::size_t idx = (start + j) % n;
      if (!singular[idx]) {
        ++j;
        continue;
      }
      std::size_t best = idx;
      while (j < n && singular[(start + j) % n]) {
        const std::size_t k = (start + j) % n;
        if (fine[k] > fine[best]) best = k;
        ++j;
      }
      // parabolic refinement of log mass around the peak
      const double ym = std::log(fine[(best + n - 1) % n]), y0 = std::log(fine[best]),
                   yp = std::log(fine[(best + 1) % n]);
      const double curvature = ym - 2.0 * y0 + yp;
      double offset = 0.0;
      if (curvature < 0.0 && std::isfinite(ym) && std::isfinite(yp)) offset = std::clamp(0.5 * (ym - yp) / curvature, -0.5, 0.5);
      const double cell = two_pi / static_cast<double>(n);
      report.detections.push_back({reduce_angle((static_cast<double>(best) + offset) * cell), dir, fine[best], slope[best]});
    }
  }
  std::stable_sort(report.detections.begin(), report.detections.end(),
                   [](const Detection& a, const Detection& b) { return a.mass > b.mass; });
  for (const auto& det : report.detections) report.h_slopes.push_back(det.slope);
  return report;
}

enum class TestFunctionKind { cusp, hardy_plus, hardy_minus, smooth };

inline std::string to_string(TestFunctionKind k) {
  switch (k) {
    case TestFunctionKind::cusp: return "cusp";
    case TestFunctionKind::hardy_plus: return "hardy-plus";
    case TestFunctionKind::hardy_minus: return "hardy-minus";
    case TestFunctionKind::smooth: return "smooth";
  }
  return "unknown";
}

/// Test functions with closed-form Fourier coefficients, truncated to |m| <= m_max:
///   cusp         |sin((theta - theta0)/2)|^alpha, singular at theta0 in both directions
///   hardy_plus   sum_{m>0} m^{-1} e^{i m (theta - theta0)}, singular at (theta0, +) only
///   hardy_minus  its mirror, singular at (theta0, -) only
///   smooth       periodized Gaussian of standard deviation alpha, no singularities
struct TestFunction {
  TestFunctionKind kind = TestFunctionKind::cusp;
  double theta0 = 0.0;
  double alpha = 0.3;
  long m_max = 1024;

  /// Coefficient of e^{i m theta} without the e^{-i m theta0} factor.
  double base_coefficient(long m) const {
    switch (kind) {
      case TestFunctionKind::cusp: {
        // c_0 = Gamma(1 + alpha) / (2^alpha Gamma(1 + alpha/2)^2), c_{m+1}/c_m = (m - alpha/2)/(m + 1 + alpha/2)
        double cm = std::exp(std::lgamma(1.0 + alpha) - alpha * std::log(2.0) - 2.0 * std::lgamma(1.0 + 0.5 * alpha));
        const long am = std::abs(m);
        for (long j = 0; j < am; ++j) cm *= (j - 0.5 * alpha) / (j + 1.0 + 0.5 * alpha);
        return cm;
      }
      case TestFunctionKind::hardy_plus: return m > 0 ? 1.0 / static_cast<double>(m) : 0.0;
      case TestFunctionKind::hardy_minus: return m < 0 ? 1.0 / static_cast<double>(-m) : 0.0;
      case TestFunctionKind::smooth:
        return alpha / std::sqrt(two_pi) * std::exp(-0.5 * alpha * alpha * static_cast<double>(m) * static_cast<double>(m));
    }
    return 0.0;
  }

  std::vector<Complex> coefficients(std::size_t n) const {
    require(m_max >= 1, ErrorKind::invalid_input, "test function needs m_max >= 1");
    require(2 * static_cast<std::size_t>(m_max) < n, ErrorKind::invalid_input, "grid too small for the test function band");
    require(kind != TestFunctionKind::cusp || (alpha > 0.0 && alpha < 2.0), ErrorKind::invalid_input,
            "cusp exponent must lie in (0, 2)");
    require(kind != TestFunctionKind::smooth || alpha > 0.0, ErrorKind::invalid_input, "smooth width must be positive");
    std::vector<Complex> c(n, 0.0);
    for (long m = -m_max; m <= m_max; ++m) c[frequency_index(m, n)] = std::polar(base_coefficient(m), -m * theta0);
    return c;
  }

  std::vector<Complex> samples(std::size_t n) const {
    FourierTransform fft(n);
    return fft.synthesize(coefficients(n));
  }

  /// The wave-front set by construction.
  std::vector<Detection> expected_wavefront() const {
    const double t = reduce_angle(theta0);
    switch (kind) {
      case TestFunctionKind::cusp: return {{t, 1}, {t, -1}};
      case TestFunctionKind::hardy_plus: return {{t, 1}};
      case TestFunctionKind::hardy_minus: return {{t, -1}};
      case TestFunctionKind::smooth: return {};
    }
    return {};
  }
};

struct WFMatch {
  std::size_t matched = 0;
  std::size_t missing = 0;
  std::size_t spurious = 0;
  double max_cell_error = 0.0;
  bool pass() const { return missing == 0 && spurious == 0; }
};

/// Pairs each expected (theta, direction) with an unused detection of the same
/// direction within tol_cells grid cells.
inline WFMatch match_detections(const std::vector<Detection>& expected, const std::vector<Detection>& found,
                                std::size_t n, double tol_cells) {
  const double cell = two_pi / static_cast<double>(n);
  WFMatch out;
  std::vector<char> used(found.size(), 0);
  for (const auto& e : expected) {
    std::size_t best = found.size();
    double best_err = 0.0;
    for (std::size_t i = 0; i < found.size(); ++i) {
      if (used[i] || found[i].direction != e.direction) continue;
      const double err = std::abs(angle_difference(found[i].theta, e.theta)) / cell;
      if (err <= tol_cells && (best == found.size() || err < best_err)) best = i, best_err = err;
    }
    if (best == found.size()) {
      ++out.missing;
      continue;
    }
    used[best] = 1;
    ++out.matched;
    out.max_cell_error = std::max(out.max_cell_error, best_err);
  }
  for (char u : used) out.spurious += u ? 0 : 1;
  return out;
}

struct WFTheoremReport {
  double a = 1.0;
  std::size_t grid_size = 0;
  WFReport input;
  WFReport output;
  WFReport returned;
  std::vector<Detection> predicted;
  WFMatch input_match;
  WFMatch forward;
  WFMatch inverse;
  bool passed() const { return input_match.pass() && forward.pass() && inverse.pass(); }
};

/// Applies S(lambda) for the cone over the radius-a circle to u, and checks that
/// each singularity (theta, sign) of u reappears at (theta + sign pi / a, sign)
/// with nothing else above threshold; then that S(lambda)^{-1} maps it back.
inline WFTheoremReport verify_wf_theorem(double a, const RadialPotential& W, double lambda, const TestFunction& u,
                                         double tol_cells, std::size_t grid_size = 4096, const ProbeGrid& grid = {},
                                         double decay_orders = 4.0, double phase_tol = 1e-6) {
  require(tol_cells >= 0.0, ErrorKind::invalid_input, "cell tolerance must be nonnegative");
  require(grid_size >= 4 * static_cast<std::size_t>(u.m_max), ErrorKind::invalid_input,
          "grid needs at least 4 m_max points");
  const auto table = build_smatrix(a, W, lambda, u.m_max, phase_tol);
  const auto samples = u.samples(grid_size);
  const auto scattered = apply_smatrix(table, samples);
  const auto back = apply_smatrix(table.inverse(), scattered);

  WFTheoremReport r;
  r.a = a;
  r.grid_size = grid_size;
  r.input = detect_wavefront(samples, grid, decay_orders);
  r.output = detect_wavefront(scattered, grid, decay_orders);
  r.returned = detect_wavefront(back, grid, decay_orders);
  r.input_match = match_detections(u.expected_wavefront(), r.input.detections, grid_size, tol_cells);
  for (const auto& d : r.input.detections) {
    r.predicted.push_back({reduce_angle(d.theta + d.direction * std::numbers::pi / a), d.direction, d.mass, d.slope});
  }
  r.forward = match_detections(r.predicted, r.output.detections, grid_size, tol_cells);
  r.inverse = match_detections(r.input.detections, r.returned.detections, grid_size, tol_cells);
  return r;
}

}  // namespace conic_scatter
