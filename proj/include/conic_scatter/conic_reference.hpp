#pragma once

// Exact dynamics of the conic Hamiltonian p_c = rho^2/2 + q(theta, omega)/r^2:
// closed-form flow, the classical wave operators w_{c,+-} and the scattering
// map s_c = w_{c,+}^{-1} o w_{c,-}.

#include <cmath>
#include <numbers>
#include <string>

#include "conic_scatter/errors.hpp"
#include "conic_scatter/phase_geometry.hpp"

namespace conic_scatter {

enum class Sign : int { minus = -1, plus = 1 };

constexpr double to_double(Sign s) { return static_cast<double>(static_cast<int>(s)); }

struct ConicInvariants {
  double E0 = 0.0;
  double q0 = 0.0;
};

/// Asymptotic data (r_+-, rho_+-, theta_+-, omega_+-) of a trajectory.
struct ScatteringData {
  double r_as = 0.0;
  double rho_as = 0.0;
  AngularPoint angular_as;
};

inline bool is_finite(const ScatteringData& d) {
  return std::isfinite(d.r_as) && std::isfinite(d.rho_as) && is_finite(d.angular_as);
}

inline double conic_energy(const BoundaryMetric& m, const PhasePoint& x) {
  return 0.5 * x.rho * x.rho + angular_energy(m, x.angular) / (x.r * x.r);
}

inline ConicInvariants conic_invariants(const BoundaryMetric& m, const PhasePoint& x) {
  require(is_finite(x), ErrorKind::invalid_input, "phase point has non-finite entries");
  require(x.r > 0.0, ErrorKind::domain, "r must be positive");
  const double q0 = angular_energy(m, x.angular);
  return {0.5 * x.rho * x.rho + q0 / (x.r * x.r), q0};
}

/// Geodesic times sigma_+ = pi/2 - atan(b) and sigma_- = -pi/2 - atan(b)
/// written with atan2 so they stay accurate when |b| is huge.
inline double asymptotic_geodesic_time(double b, Sign sign) {
  return sign == Sign::plus ? std::atan2(1.0, b) : -std::atan2(1.0, -b);
}

namespace detail {

inline PhasePoint conic_flow_lift(const BoundaryMetric& m, const PhasePoint& x0, double t, double tol) {
  require(std::isfinite(t), ErrorKind::invalid_input, "flow time must be finite");
  const auto [E0, q0] = conic_invariants(m, x0);
  if (t == 0.0) return x0;
  if (q0 == 0.0) {
    const double r = x0.r + t * x0.rho;
    require(r > 0.0, ErrorKind::domain, "radial trajectory with omega = 0 reaches r = 0");
    return {r, x0.rho, x0.angular};
  }
  const double b = x0.r * x0.rho;
  const double r2 = 2.0 * E0 * t * t + 2.0 * b * t + x0.r * x0.r;
  const double r = std::sqrt(r2);
  const double rho = (2.0 * E0 * t + b) / r;
  const double s = std::sqrt(2.0 * q0);
  const double sigma = std::atan((2.0 * E0 * t + b) / s) - std::atan(b / s);
  require(std::abs(sigma) < std::numbers::pi, ErrorKind::numeric, "geodesic time left (-pi, pi)");
  return {r, rho, geodesic_flow_lift(m, x0.angular, sigma, tol)};
}

/// Conic asymptotic data of the trajectory through (r~ + t rho, rho, angular)
/// at time t, where r~ = r - t rho; the radial datum is formed without
/// cancellation between r and t rho.
inline ScatteringData conic_asymptote_at(const BoundaryMetric& m, double r_tilde, double rho,
                                         const AngularPoint& angular, double t, Sign sign, double tol) {
  const double r = r_tilde + t * rho;
  require(r > 0.0, ErrorKind::domain, "r must be positive");
  const double q = angular_energy(m, angular);
  const double E = 0.5 * rho * rho + q / (r * r);
  require(E > 0.0 && q > 0.0, ErrorKind::degenerate, "scattering data need E0 > 0 and omega != 0");
  const double v = std::sqrt(2.0 * E);
  const double sg = to_double(sign);
  ScatteringData d;
  d.rho_as = sg * v;
  d.r_as = sg * (r_tilde * rho - 2.0 * t * q / (r * r)) / v;
  const double sigma = asymptotic_geodesic_time(r * rho / std::sqrt(2.0 * q), sign);
  d.angular_as = geodesic_flow_lift(m, angular, sigma, tol);
  return d;
}

inline PhasePoint conic_wave_map_lift(const BoundaryMetric& m, const ScatteringData& d, Sign sign, double tol) {
  require(is_finite(d), ErrorKind::invalid_input, "scattering data have non-finite entries");
  require(to_double(sign) * d.rho_as > 0.0, ErrorKind::domain, "wave map needs +-rho > 0 on the matching side");
  require(d.angular_as.omega != 0.0, ErrorKind::domain, "wave map needs omega != 0");
  const double q = angular_energy(m, d.angular_as);
  const double r0 = std::sqrt(d.r_as * d.r_as + 2.0 * q / (d.rho_as * d.rho_as));
  const double b = d.r_as * d.rho_as;
  const double sigma = asymptotic_geodesic_time(b / std::sqrt(2.0 * q), sign);
  return {r0, b / r0, geodesic_flow_lift(m, d.angular_as, -sigma, tol)};
}

inline ScatteringData reduced(ScatteringData d) {
  d.angular_as = conic_scatter::reduced(d.angular_as);
  return d;
}

}  // namespace detail

/// exp(t H_{p_c})(x0): radial part in closed form, angular part through the
/// geodesic flow at geodesic time sigma(t).
inline PhasePoint conic_flow_exact(const BoundaryMetric& m, const PhasePoint& x0, double t, double tol = 1e-10) {
  return reduced(detail::conic_flow_lift(m, x0, t, tol));
}

/// w_{c,+-}^{-1}(x0).
inline ScatteringData conic_wave_data(const BoundaryMetric& m, const PhasePoint& x0, Sign sign, double tol = 1e-12) {
  const auto inv = conic_invariants(m, x0);
  require(inv.E0 > 0.0 && x0.angular.omega != 0.0, ErrorKind::degenerate,
          "scattering data need E0 > 0 and omega != 0");
  return detail::reduced(detail::conic_asymptote_at(m, x0.r, x0.rho, x0.angular, 0.0, sign, tol));
}

/// w_{c,+-}(d).
inline PhasePoint conic_wave_map(const BoundaryMetric& m, const ScatteringData& d, Sign sign, double tol = 1e-12) {
  return reduced(detail::conic_wave_map_lift(m, d, sign, tol));
}

/// w_c(t)^{-1}(x) = exp(-t H_{p_f}) o exp(t H_{p_c})(x), returned as free data
/// (r - t rho, rho, theta, omega).
inline PhasePoint conic_interaction_inverse(const BoundaryMetric& m, const PhasePoint& x, double t,
                                            double tol = 1e-12) {
  const PhasePoint y = detail::conic_flow_lift(m, x, t, tol);
  return reduced(PhasePoint{y.r - t * y.rho, y.rho, y.angular});
}

/// w_c(t)(y) = exp(-t H_{p_c}) o exp(t H_{p_f})(y).
inline PhasePoint conic_interaction(const BoundaryMetric& m, const PhasePoint& y, double t, double tol = 1e-12) {
  const PhasePoint moved{y.r + t * y.rho, y.rho, y.angular};
  require(moved.r > 0.0, ErrorKind::domain, "free motion leaves r > 0");
  return conic_flow_exact(m, moved, -t, tol);
}

/// Maximum componentwise discrepancy between two sets of scattering data, each
/// component measured relative to max(1, |value|); angles compared mod 2 pi.
inline double data_discrepancy(const ScatteringData& a, const ScatteringData& b) {
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y))); };
  double e = rel(a.r_as, b.r_as);
  e = std::max(e, rel(a.rho_as, b.rho_as));
  e = std::max(e, std::abs(angle_difference(a.angular_as.theta, b.angular_as.theta)));
  e = std::max(e, rel(a.angular_as.omega, b.angular_as.omega));
  return e;
}

inline double point_discrepancy(const PhasePoint& a, const PhasePoint& b) {
  return data_discrepancy({a.r, a.rho, a.angular}, {b.r, b.rho, b.angular});
}

/// s_c(r, rho, theta, omega) = (-r, -rho, exp(pi H_sqrt(2q))(theta, omega)).
/// The closed form is cross-checked against w_{c,+}^{-1} o w_{c,-} on every
/// call; a disagreement above 1e-9 is an accuracy error.
inline ScatteringData conic_scattering_map(const BoundaryMetric& m, const ScatteringData& d_minus,
                                           double tol = 1e-12) {
  require(is_finite(d_minus), ErrorKind::invalid_input, "scattering data have non-finite entries");
  require(d_minus.rho_as < 0.0, ErrorKind::domain, "incoming data need rho < 0");
  require(d_minus.angular_as.omega != 0.0, ErrorKind::domain, "incoming data need omega != 0");
  ScatteringData closed;
  closed.r_as = -d_minus.r_as;
  closed.rho_as = -d_minus.rho_as;
  closed.angular_as = geodesic_flow(m, d_minus.angular_as, std::numbers::pi, tol);

  const PhasePoint x0 = detail::conic_wave_map_lift(m, d_minus, Sign::minus, tol);
  const ScatteringData composed = detail::reduced(
      detail::conic_asymptote_at(m, x0.r, x0.rho, x0.angular, 0.0, Sign::plus, tol));
  const double gap = data_discrepancy(closed, composed);
  require(gap <= 1e-9, ErrorKind::accuracy,
          "closed-form scattering map disagrees with wave-operator composition by " + std::to_string(gap));
  return closed;
}

}  // namespace conic_scatter
