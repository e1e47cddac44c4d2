#pragma once

// Boundary geometry on the circle: the cometric h(theta), the angular
// Hamiltonian q = h(theta) omega^2 / 2, Poisson brackets, and the unit-speed
// geodesic flow exp(sigma H_sqrt(2q)).

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conic_scatter/errors.hpp"
#include "conic_scatter/ode.hpp"

namespace conic_scatter {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Finite trigonometric series c0 + sum_k (a_k cos k x + b_k sin k x), k >= 1.
class TrigSeries {
 public:
  TrigSeries() = default;
  explicit TrigSeries(double c0, std::vector<double> cos_coeffs = {}, std::vector<double> sin_coeffs = {})
      : c0_(c0), a_(std::move(cos_coeffs)), b_(std::move(sin_coeffs)) {
    if (b_.size() < a_.size()) b_.resize(a_.size(), 0.0);
    if (a_.size() < b_.size()) a_.resize(b_.size(), 0.0);
  }

  /// Trigonometric interpolant through samples at x_j = 2 pi j / N.
  static TrigSeries interpolate(std::span<const double> samples) {
    const std::size_t n = samples.size();
    require(n >= 3, ErrorKind::invalid_input, "tabulated metric needs at least 3 samples");
    double c0 = 0.0;
    for (double s : samples) c0 += s;
    c0 /= static_cast<double>(n);
    const std::size_t kmax = n / 2;
    std::vector<double> a(kmax, 0.0), b(kmax, 0.0);
    for (std::size_t k = 1; k <= kmax; ++k) {
      double ak = 0.0, bk = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double x = two_pi * static_cast<double>(j * k % n) / static_cast<double>(n);
        ak += samples[j] * std::cos(x);
        bk += samples[j] * std::sin(x);
      }
      const bool nyquist = (n % 2 == 0) && (k == kmax);
      a[k - 1] = (nyquist ? 1.0 : 2.0) * ak / static_cast<double>(n);
      b[k - 1] = nyquist ? 0.0 : 2.0 * bk / static_cast<double>(n);
    }
    return TrigSeries(c0, std::move(a), std::move(b));
  }

  template <class T>
  T operator()(const T& x) const {
    using std::cos;
    using std::sin;
    T result(c0_);
    for (std::size_t k = 0; k < a_.size(); ++k) {
      const double kk = static_cast<double>(k + 1);
      if (a_[k] != 0.0) result = result + a_[k] * cos(kk * x);
      if (b_[k] != 0.0) result = result + b_[k] * sin(kk * x);
    }
    return result;
  }

  double derivative(double x) const {
    double result = 0.0;
    for (std::size_t k = 0; k < a_.size(); ++k) {
      const double kk = static_cast<double>(k + 1);
      result += kk * (b_[k] * std::cos(kk * x) - a_[k] * std::sin(kk * x));
    }
    return result;
  }

  bool is_constant() const {
    for (std::size_t k = 0; k < a_.size(); ++k) {
      if (a_[k] != 0.0 || b_[k] != 0.0) return false;
    }
    return true;
  }

  double constant_term() const { return c0_; }
  const std::vector<double>& cos_coefficients() const { return a_; }
  const std::vector<double>& sin_coefficients() const { return b_; }

 private:
  double c0_ = 1.0;
  std::vector<double> a_;
  std::vector<double> b_;
};

/// Cometric h^{11}(theta) and density H(theta) on the circle chart [0, 2 pi).
struct BoundaryMetric {
  static constexpr int dim = 1;
  static constexpr double period = two_pi;

  TrigSeries cometric{1.0};
  TrigSeries density{1.0};

  /// Round circle of radius a: h = 1/a^2.
  static BoundaryMetric constant(double radius) {
    require(radius > 0.0 && std::isfinite(radius), ErrorKind::invalid_input, "circle radius must be positive");
    return BoundaryMetric{TrigSeries(1.0 / (radius * radius)), TrigSeries(1.0)};
  }

  /// h = (1 + epsilon cos theta) / a^2, |epsilon| < 1.
  static BoundaryMetric cosine(double radius, double epsilon) {
    require(radius > 0.0 && std::isfinite(radius), ErrorKind::invalid_input, "circle radius must be positive");
    require(std::abs(epsilon) < 1.0, ErrorKind::invalid_input, "|epsilon| must be below 1 for a positive cometric");
    const double c = 1.0 / (radius * radius);
    BoundaryMetric m{TrigSeries(c, {c * epsilon}), TrigSeries(1.0)};
    return m;
  }

  static BoundaryMetric tabulated(std::span<const double> samples) {
    BoundaryMetric m{TrigSeries::interpolate(samples), TrigSeries(1.0)};
    m.validate();
    return m;
  }

  template <class T>
  T h(const T& theta) const {
    return cometric(theta);
  }

  bool is_constant() const { return cometric.is_constant(); }

  /// Radius of a round circle; only meaningful for constant metrics.
  double radius() const {
    require(is_constant(), ErrorKind::invalid_input, "radius() requires a constant cometric");
    return 1.0 / std::sqrt(cometric.constant_term());
  }

  /// Positivity and periodicity audit on a uniform sample of the chart.
  void validate(std::size_t samples = 1024) const {
    for (std::size_t j = 0; j < samples; ++j) {
      const double theta = period * static_cast<double>(j) / static_cast<double>(samples);
      const double hv = cometric(theta);
      const double dv = density(theta);
      require(std::isfinite(hv) && hv > 0.0, ErrorKind::invalid_input,
              "cometric not positive at theta=" + std::to_string(theta));
      require(std::isfinite(dv) && dv > 0.0, ErrorKind::invalid_input,
              "density not positive at theta=" + std::to_string(theta));
      const double shifted = cometric(theta + period);
      require(std::abs(shifted - hv) <= 1e-12 * std::max(1.0, std::abs(hv)), ErrorKind::invalid_input,
              "cometric is not periodic");
    }
  }
};

struct AngularPoint {
  double theta = 0.0;
  double omega = 0.0;
};

/// A point (r, rho, theta, omega) of T*M_inf. r > 0 for interior points; free
/// (asymptotic) coordinates may carry any real r.
struct PhasePoint {
  double r = 1.0;
  double rho = 0.0;
  AngularPoint angular;
};

inline double reduce_angle(double theta) {
  double t = std::fmod(theta, two_pi);
  if (t < 0.0) t += two_pi;
  if (t >= two_pi) t -= two_pi;
  return t;
}

/// a - b wrapped into (-pi, pi].
inline double angle_difference(double a, double b) {
  double d = std::remainder(a - b, two_pi);
  if (d <= -std::numbers::pi) d += two_pi;
  return d;
}

inline AngularPoint reduced(AngularPoint p) {
  p.theta = reduce_angle(p.theta);
  return p;
}

inline PhasePoint reduced(PhasePoint x) {
  x.angular = reduced(x.angular);
  return x;
}

inline bool is_finite(const AngularPoint& p) { return std::isfinite(p.theta) && std::isfinite(p.omega); }
inline bool is_finite(const PhasePoint& x) { return std::isfinite(x.r) && std::isfinite(x.rho) && is_finite(x.angular); }

/// q(theta, omega) = h(theta) omega^2 / 2.
inline double angular_energy(const BoundaryMetric& m, const AngularPoint& p) {
  require(is_finite(p), ErrorKind::invalid_input, "angular point has non-finite entries");
  return 0.5 * m.h(p.theta) * p.omega * p.omega;
}

/// Central-difference Poisson bracket {f, g} = sum f_x g_xi - f_xi g_x over the
/// canonical pairs (r, rho) and (theta, omega), so that {r, rho} = 1.
template <class F, class G>
double poisson_bracket(F&& f, G&& g, const PhasePoint& at, double step) {
  require(step > 0.0 && std::isfinite(step), ErrorKind::invalid_input, "bracket step must be positive");
  auto shifted = [&](int coord, double delta) {
    PhasePoint x = at;
    switch (coord) {
      case 0: x.r += delta; break;
      case 1: x.rho += delta; break;
      case 2: x.angular.theta += delta; break;
      default: x.angular.omega += delta; break;
    }
    return x;
  };
  auto partial = [&](auto&& fn, int coord) {
    return (fn(shifted(coord, step)) - fn(shifted(coord, -step))) / (2.0 * step);
  };
  const double fr = partial(f, 0), frho = partial(f, 1), ftheta = partial(f, 2), fomega = partial(f, 3);
  const double gr = partial(g, 0), grho = partial(g, 1), gtheta = partial(g, 2), gomega = partial(g, 3);
  return fr * grho - frho * gr + ftheta * gomega - fomega * gtheta;
}

namespace detail {

// Geodesic flow keeping the angular lift; constant cometrics use the exact
// rotation theta + sigma sign(omega) sqrt(h).
inline AngularPoint geodesic_flow_lift(const BoundaryMetric& m, const AngularPoint& p, double sigma, double tol) {
  require(is_finite(p) && std::isfinite(sigma), ErrorKind::invalid_input, "non-finite geodesic flow input");
  require(tol > 0.0, ErrorKind::invalid_input, "tolerance must be positive");
  require(p.omega != 0.0, ErrorKind::degenerate, "geodesic flow of sqrt(2q) is singular at omega = 0");
  const double s = p.omega > 0.0 ? 1.0 : -1.0;
  if (sigma == 0.0) return p;
  if (m.is_constant()) {
    return {p.theta + sigma * s * std::sqrt(m.cometric.constant_term()), p.omega};
  }
  // The omega equation is linear in omega, so integrate omega / |omega_0| and
  // rescale: step selection then does not depend on the momentum scale.
  const double scale = std::abs(p.omega);
  using State = std::array<double, 2>;
  auto rhs = [&m, s](const State& x, State& dx, double) {
    const double hv = m.h(x[0]);
    const double root = std::sqrt(hv);
    dx[0] = s * root;
    dx[1] = -std::abs(x[1]) * m.cometric.derivative(x[0]) / (2.0 * root);
  };
  State x{p.theta, s};
  double t = 0.0;
  AdaptiveIntegrator<2> integrator(tol);
  integrator.advance(rhs, x, t, sigma);
  return {x[0], scale * x[1]};
}

}  // namespace detail

/// exp(sigma H_sqrt(2q))(theta, omega); theta is reduced to [0, 2 pi).
inline AngularPoint geodesic_flow(const BoundaryMetric& m, const AngularPoint& p, double sigma, double tol = 1e-10) {
  return reduced(detail::geodesic_flow_lift(m, p, sigma, tol));
}

}  // namespace conic_scatter
