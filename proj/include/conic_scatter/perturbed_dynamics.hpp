#pragma once

// Perturbations of the conic Hamiltonian: the full symbol
//   p = (a1 rho^2 + 2 rho a2 omega / r + a3 omega^2 / r^2) / 2 + V,
// its semiclassical rescaling p^h(r, rho, theta, omega) = p(r/h, rho, theta, omega/h),
// numerical wave operators, the scattering map, rate harnesses and the
// leading-order transport check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "conic_scatter/conic_reference.hpp"
#include "conic_scatter/dual.hpp"
#include "conic_scatter/errors.hpp"
#include "conic_scatter/ode.hpp"
#include "conic_scatter/parallel.hpp"
#include "conic_scatter/phase_geometry.hpp"
#include "conic_scatter/rate_fit.hpp"

namespace conic_scatter {

enum class ProfileFamily { trivial, regularized, power };

inline std::string to_string(ProfileFamily f) {
  switch (f) {
    case ProfileFamily::trivial: return "trivial";
    case ProfileFamily::regularized: return "regularized";
    case ProfileFamily::power: return "power";
  }
  return "unknown";
}

/// Radial perturbation coefficients
///   a1 = 1 + c1 env(1+mu),  a2 = c2 env(mu),  a3 = h(theta)(1 + c3 env(mu)),  V = cV env(1+mu)
/// with env(r, s) = (1 + r^2)^{-s/2} (regularized) or r^{-s} (power).
struct PerturbationProfile {
  ProfileFamily family = ProfileFamily::trivial;
  double mu = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double cV = 0.0;

  static PerturbationProfile trivial() { return {}; }

  static PerturbationProfile regularized(double mu, double c1, double c2, double c3, double cV) {
    PerturbationProfile p{ProfileFamily::regularized, mu, c1, c2, c3, cV};
    p.check_parameters();
    return p;
  }

  static PerturbationProfile power(double mu, double c1, double c2, double c3, double cV) {
    PerturbationProfile p{ProfileFamily::power, mu, c1, c2, c3, cV};
    p.check_parameters();
    return p;
  }

  bool is_trivial() const {
    return family == ProfileFamily::trivial || (c1 == 0.0 && c2 == 0.0 && c3 == 0.0 && cV == 0.0);
  }

  /// Only V is nonzero, so the perturbation is a radial potential.
  bool is_separable() const { return is_trivial() || (c1 == 0.0 && c2 == 0.0 && c3 == 0.0); }

  template <class T>
  T envelope(const T& r, double order) const {
    using std::pow;
    switch (family) {
      case ProfileFamily::regularized: return pow(1.0 + r * r, -0.5 * order);
      case ProfileFamily::power: return pow(r, -order);
      case ProfileFamily::trivial: break;
    }
    return T(0.0);
  }

  template <class T> T a1(const T& r) const { return c1 == 0.0 ? T(1.0) : 1.0 + c1 * envelope(r, 1.0 + mu); }
  template <class T> T a2(const T& r) const { return c2 == 0.0 ? T(0.0) : c2 * envelope(r, mu); }
  /// a3 / h(theta).
  template <class T> T a3_factor(const T& r) const { return c3 == 0.0 ? T(1.0) : 1.0 + c3 * envelope(r, mu); }
  template <class T> T V(const T& r) const { return cV == 0.0 ? T(0.0) : cV * envelope(r, 1.0 + mu); }

  void check_parameters() const {
    require(std::isfinite(mu) && mu > 0.0 && mu <= 1.0, ErrorKind::invalid_input, "decay rate mu must lie in (0, 1]");
    require(std::isfinite(c1) && std::isfinite(c2) && std::isfinite(c3) && std::isfinite(cV),
            ErrorKind::invalid_input, "profile coefficients must be finite");
  }
};

/// Outcome of the finite-sample decay and positivity audit.
struct ProfileAudit {
  double declared_constant = 0.0;
  double worst_ratio = 0.0;  // max over samples of |deviation| r^{decay} / declared constant
  double min_a1 = 0.0;
  double min_determinant = 0.0;
};

/// Samples 1000 log-spaced radii on [1, 1e6] and a theta grid; throws
/// invalid-input when a decay bound or the positivity of the quadratic form
/// fails. For the regularized family the envelope maximum at r = 0 is included.
inline ProfileAudit audit_profile(const PerturbationProfile& p, const BoundaryMetric& m, std::size_t radii = 1000,
                                  std::size_t angles = 64) {
  p.check_parameters();
  ProfileAudit a;
  double hmax = 0.0;
  for (std::size_t j = 0; j < angles; ++j) hmax = std::max(hmax, m.h(two_pi * static_cast<double>(j) / angles));
  a.declared_constant = std::max({std::abs(p.c1), std::abs(p.c2), std::abs(p.c3) * hmax, std::abs(p.cV)});
  a.min_a1 = std::numeric_limits<double>::infinity();
  a.min_determinant = std::numeric_limits<double>::infinity();
  std::vector<double> rs;
  if (p.family == ProfileFamily::regularized) rs.push_back(0.0);
  for (std::size_t i = 0; i < radii; ++i) rs.push_back(std::pow(10.0, 6.0 * static_cast<double>(i) / (radii - 1)));
  for (double r : rs) {
    if (r >= 1.0 && a.declared_constant > 0.0) {
      const double lo = std::pow(r, -p.mu), hi = std::pow(r, -1.0 - p.mu);
      a.worst_ratio = std::max({a.worst_ratio, std::abs(p.a1(r) - 1.0) / hi, std::abs(p.a2(r)) / lo,
                                std::abs(p.V(r)) / hi});
      for (std::size_t j = 0; j < angles; ++j) {
        const double hv = m.h(two_pi * static_cast<double>(j) / angles);
        a.worst_ratio = std::max(a.worst_ratio, std::abs(hv * (p.a3_factor(r) - 1.0)) / lo);
      }
    }
    for (std::size_t j = 0; j < angles; ++j) {
      const double hv = m.h(two_pi * static_cast<double>(j) / angles);
      const double a1 = p.a1(r), a2 = p.a2(r), a3 = hv * p.a3_factor(r);
      a.min_a1 = std::min(a.min_a1, a1);
      a.min_determinant = std::min(a.min_determinant, a1 * a3 - a2 * a2);
    }
  }
  if (a.declared_constant > 0.0) a.worst_ratio /= a.declared_constant;
  require(a.worst_ratio <= 1.0 + 1e-12, ErrorKind::invalid_input, "profile violates its declared decay bounds");
  require(a.min_a1 > 0.0 && a.min_determinant > 0.0, ErrorKind::invalid_input,
          "profile quadratic form is not positive definite");
  return a;
}

/// p^h for a fixed profile, boundary metric and semiclassical scale h.
struct ScaledSymbol {
  PerturbationProfile profile;
  BoundaryMetric metric;
  double h = 1.0;

  /// Note omega / r is unchanged by the rescaling, so only the coefficient
  /// radii move to r / h.
  template <class T>
  T operator()(const T& r, const T& rho, const T& theta, const T& omega) const {
    const T R = r / h;
    const T w = omega / r;
    const T kinetic = profile.a1(R) * rho * rho + 2.0 * rho * profile.a2(R) * w +
                      metric.h(theta) * profile.a3_factor(R) * w * w;
    return 0.5 * kinetic + profile.V(R);
  }

  void validate() const {
    require(std::isfinite(h) && h > 0.0 && h <= 1.0, ErrorKind::invalid_input, "semiclassical scale h must lie in (0, 1]");
    profile.check_parameters();
  }
};

inline double full_symbol(const ScaledSymbol& s, const PhasePoint& x) {
  require(is_finite(x), ErrorKind::invalid_input, "phase point has non-finite entries");
  require(x.r > 0.0, ErrorKind::domain, "full symbol needs r > 0");
  return s(x.r, x.rho, x.angular.theta, x.angular.omega);
}

/// (p, dp/dr, dp/drho, dp/dtheta, dp/domega).
inline std::array<double, 5> symbol_gradient(const ScaledSymbol& s, double r, double rho, double theta, double omega) {
  using D = Dual<4>;
  const D v = s(D::variable(r, 0), D::variable(rho, 1), D::variable(theta, 2), D::variable(omega, 3));
  return {v.v, v.d[0], v.d[1], v.d[2], v.d[3]};
}

namespace detail {

inline constexpr double trapped_radius = 0.1;

// Hamilton's equations for p^h in interaction coordinates (r - t rho, rho,
// theta, omega); the first coordinate stays O(1) as |t| grows.
class InteractionFlow {
 public:
  using State = std::array<double, 4>;

  InteractionFlow(const ScaledSymbol& s, const PhasePoint& x0, double tol)
      : s_(s), integrator_(tol), x_{x0.r, x0.rho, x0.angular.theta, x0.angular.omega} {
    s.validate();
    require(is_finite(x0), ErrorKind::invalid_input, "initial point has non-finite entries");
    require(x0.r > 0.0, ErrorKind::domain, "initial point needs r > 0");
  }

  template <class OnStep>
  void advance(double t_end, OnStep&& on_step) {
    auto rhs = [this](const State& y, State& dy, double t) {
      const double r = y[0] + t * y[1];
      const auto g = symbol_gradient(s_, r, y[1], y[2], y[3]);
      dy[0] = g[2] - y[1] + t * g[1];
      dy[1] = -g[1];
      dy[2] = g[4];
      dy[3] = -g[3];
    };
    integrator_.advance(rhs, x_, t_, t_end, [&](const State& y, double t) {
      const double r = y[0] + t * y[1];
      if (!(r >= trapped_radius)) {
        fail(ErrorKind::trapped, "trajectory reached r=" + std::to_string(r) + " at t=" + std::to_string(t));
      }
      on_step(y, t);
    });
  }

  void advance(double t_end) {
    advance(t_end, [](const State&, double) {});
  }

  double time() const { return t_; }
  std::size_t steps() const { return integrator_.accepted_steps(); }
  const State& state() const { return x_; }
  PhasePoint point() const { return {x_[0] + t_ * x_[1], x_[1], {x_[2], x_[3]}}; }

 private:
  const ScaledSymbol& s_;
  AdaptiveIntegrator<4> integrator_;
  State x_;
  double t_ = 0.0;
};

}  // namespace detail

/// exp(t H_{p^h})(x0) with the angle kept as an unreduced lift.
inline PhasePoint perturbed_flow_lift(const ScaledSymbol& s, const PhasePoint& x0, double t, double tol = 1e-10) {
  require(std::isfinite(t), ErrorKind::invalid_input, "flow time must be finite");
  detail::InteractionFlow flow(s, x0, tol);
  flow.advance(t);
  return flow.point();
}

inline PhasePoint perturbed_flow(const ScaledSymbol& s, const PhasePoint& x0, double t, double tol = 1e-10) {
  return reduced(perturbed_flow_lift(s, x0, t, tol));
}

struct TrajectorySample {
  double t = 0.0;
  PhasePoint x;
  double energy = 0.0;
};

/// Samples exp(t H_{p^h})(x0) at the requested times (any order, either sign).
/// Angles are reported as the continuous lift.
inline std::vector<TrajectorySample> perturbed_trajectory(const ScaledSymbol& s, const PhasePoint& x0,
                                                          std::span<const double> times, double tol = 1e-10) {
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<TrajectorySample> out(times.size());
  auto sweep = [&](auto first, auto last) {
    detail::InteractionFlow flow(s, x0, tol);
    for (auto it = first; it != last; ++it) {
      require(std::isfinite(times[*it]), ErrorKind::invalid_input, "sample time must be finite");
      flow.advance(times[*it]);
      const PhasePoint x = flow.point();
      out[*it] = {times[*it], x, full_symbol(s, x)};
    }
  };
  const auto split = std::find_if(order.begin(), order.end(), [&](std::size_t i) { return times[i] >= 0.0; });
  sweep(std::make_reverse_iterator(split), order.rend());
  sweep(split, order.end());
  return out;
}

/// Largest h in {2^-1, ..., 2^-max_power} for which every test trajectory
/// stays above half the conic radius on |t| <= horizon.
inline double working_threshold(const PerturbationProfile& profile, const BoundaryMetric& m,
                                std::span<const PhasePoint> points, double horizon = 50.0, int max_power = 12,
                                double tol = 1e-9) {
  std::vector<double> times;
  for (int k = -20; k <= 20; ++k) times.push_back(horizon * k / 20.0);
  for (int power = 1; power <= max_power; ++power) {
    const ScaledSymbol s{profile, m, std::ldexp(1.0, -power)};
    bool ok = true;
    for (const auto& x0 : points) {
      try {
        const auto traj = perturbed_trajectory(s, x0, times, tol);
        for (const auto& sample : traj) {
          const double rc = detail::conic_flow_lift(m, x0, sample.t, tol).r;
          if (sample.x.r < 0.5 * rc) ok = false;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::trapped && e.kind() != ErrorKind::integration_failure) throw;
        ok = false;
      }
      if (!ok) break;
    }
    if (ok) return s.h;
  }
  fail(ErrorKind::degenerate, "no working scale found down to h=2^-" + std::to_string(max_power));
}

/// sup over the sample times of the discrepancy between perturbed and conic
/// trajectories, both written in interaction coordinates (r - t rho, rho,
/// theta, omega). Comparing r directly would let the O(h^mu) momentum error
/// grow linearly in t.
inline double flow_deviation(const ScaledSymbol& s, const PhasePoint& x0, std::span<const double> times,
                             double tol = 1e-10) {
  double worst = 0.0;
  const auto traj = perturbed_trajectory(s, x0, times, tol);
  for (const auto& sample : traj) {
    const PhasePoint c = detail::conic_flow_lift(s.metric, x0, sample.t, tol);
    const PhasePoint a{sample.x.r - sample.t * sample.x.rho, sample.x.rho, sample.x.angular};
    const PhasePoint b{c.r - sample.t * c.rho, c.rho, c.angular};
    worst = std::max(worst, point_discrepancy(a, b));
  }
  return worst;
}

struct Asymptotics {
  ScatteringData data;
  double error_estimate = 0.0;
};

/// w*_{+-,h}^{-1}(x0): integrates to +-T/4, +-T/2, +-T, applies the conic
/// asymptote at each stop and removes the remaining power-law tail by
/// two-point extrapolation (exponent 1 + mu for rho, mu otherwise). The
/// extrapolation from (T/4, T/2) must agree with the one from (T/2, T) to
/// within ten times the size of the correction.
inline Asymptotics extract_asymptotics_lift(const ScaledSymbol& s, const PhasePoint& x0, Sign sign, double T,
                                            double tol = 1e-10) {
  require(std::isfinite(T) && T >= 1e3, ErrorKind::invalid_input, "extraction horizon T must be at least 1e3");
  const double sg = to_double(sign);
  detail::InteractionFlow flow(s, x0, tol);
  std::array<std::array<double, 4>, 3> f{};
  const std::array<double, 3> stops{T / 4.0, T / 2.0, T};
  for (std::size_t k = 0; k < 3; ++k) {
    flow.advance(sg * stops[k]);
    const auto& y = flow.state();
    const double t = flow.time();
    if (y[3] == 0.0) fail(ErrorKind::degenerate, "omega vanished along the trajectory");
    const ScatteringData d = detail::conic_asymptote_at(s.metric, y[0], y[1], {y[2], y[3]}, t, sign, 1e-2 * tol);
    f[k] = {d.r_as, d.rho_as, d.angular_as.theta, d.angular_as.omega};
  }
  const double mu = s.profile.mu;
  const std::array<double, 4> alpha{mu, 1.0 + mu, mu, mu};
  std::array<double, 4> out{};
  double estimate = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double q = std::exp2(alpha[i]) - 1.0;
    const double late = f[2][i] + (f[2][i] - f[1][i]) / q;
    const double early = f[1][i] + (f[1][i] - f[0][i]) / q;
    const double gap = std::abs(late - early);
    const double floor = 1e3 * tol * (1.0 + std::abs(f[2][i]));
    if (gap > 10.0 * std::abs(late - f[2][i]) + floor) {
      fail(ErrorKind::accuracy, "tail extrapolation inconsistent (component " + std::to_string(i) +
                                    ", gap " + std::to_string(gap) + "); increase T");
    }
    estimate = std::max(estimate, gap / std::max(1.0, std::abs(late)));
    out[i] = late;
  }
  return {{out[0], out[1], {out[2], out[3]}}, estimate};
}

inline Asymptotics extract_asymptotics(const ScaledSymbol& s, const PhasePoint& x0, Sign sign, double T,
                                       double tol = 1e-10) {
  auto a = extract_asymptotics_lift(s, x0, sign, T, tol);
  a.data = detail::reduced(a.data);
  return a;
}

namespace detail {

inline std::array<double, 4> data_residual(const ScatteringData& got, const ScatteringData& want) {
  return {got.r_as - want.r_as, got.rho_as - want.rho_as, angle_difference(got.angular_as.theta, want.angular_as.theta),
          got.angular_as.omega - want.angular_as.omega};
}

inline double max_norm(const std::array<double, 4>& v) {
  double n = 0.0;
  for (double x : v) n = std::max(n, std::abs(x));
  return n;
}

// Solves J dx = b with partial pivoting; degenerate-error on a singular J.
inline std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> J, std::array<double, 4> b) {
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < 4; ++r) {
      if (std::abs(J[r][c]) > std::abs(J[piv][c])) piv = r;
    }
    require(std::abs(J[piv][c]) > 1e-300, ErrorKind::degenerate, "singular shooting Jacobian");
    std::swap(J[c], J[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < 4; ++r) {
      const double f = J[r][c] / J[c][c];
      for (std::size_t k = c; k < 4; ++k) J[r][k] -= f * J[c][k];
      b[r] -= f * b[c];
    }
  }
  std::array<double, 4> x{};
  for (std::size_t c = 4; c-- > 0;) {
    double acc = b[c];
    for (std::size_t k = c + 1; k < 4; ++k) acc -= J[c][k] * x[k];
    x[c] = acc / J[c][c];
  }
  return x;
}

inline PhasePoint as_point(const std::array<double, 4>& v) { return {v[0], v[1], {v[2], v[3]}}; }
inline std::array<double, 4> as_array(const PhasePoint& x) { return {x.r, x.rho, x.angular.theta, x.angular.omega}; }

}  // namespace detail

struct ShootingResult {
  ScatteringData out;
  PhasePoint initial;  // the x0 with w*_-^{-1}(x0) = d_minus
  int iterations = 0;
  double residual = 0.0;
  double error_estimate = 0.0;
};

/// s = w*_+^{-1} o w*_- : damped Newton shooting for x0 with
/// extract_asymptotics(x0, -) = d_minus, started from the conic answer, then
/// the outgoing data of x0.
inline ShootingResult scattering_map_detail(const ScaledSymbol& s, const ScatteringData& d_minus, double T,
                                            double tol = 1e-10) {
  require(is_finite(d_minus), ErrorKind::invalid_input, "scattering data have non-finite entries");
  require(d_minus.rho_as < 0.0, ErrorKind::domain, "incoming data need rho < 0");
  require(d_minus.angular_as.omega != 0.0, ErrorKind::domain, "incoming data need omega != 0");

  auto residual_at = [&](const std::array<double, 4>& x, double* estimate = nullptr) {
    const auto a = extract_asymptotics_lift(s, detail::as_point(x), Sign::minus, T, tol);
    if (estimate) *estimate = a.error_estimate;
    return detail::data_residual(a.data, d_minus);
  };
  auto admissible = [](const std::array<double, 4>& x) { return x[0] > detail::trapped_radius && x[3] != 0.0; };

  const double scale = std::max({1.0, std::abs(d_minus.r_as), std::abs(d_minus.angular_as.omega)});
  const double target = 100.0 * tol * scale;
  const double fd = std::cbrt(tol);

  std::array<double, 4> x = detail::as_array(detail::conic_wave_map_lift(s.metric, d_minus, Sign::minus, tol));
  double estimate = 0.0;
  auto R = residual_at(x, &estimate);
  double norm = detail::max_norm(R);
  int iter = 0;
  for (; iter < 50 && norm > target + estimate * scale; ++iter) {
    std::array<std::array<double, 4>, 4> J{};
    for (std::size_t j = 0; j < 4; ++j) {
      const double step = fd * std::max(1.0, std::abs(x[j]));
      auto xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      const auto Rp = residual_at(xp), Rm = residual_at(xm);
      for (std::size_t i = 0; i < 4; ++i) {
        const double diff = i == 2 ? angle_difference(Rp[i], Rm[i]) : Rp[i] - Rm[i];
        J[i][j] = diff / (2.0 * step);
      }
    }
    const auto dx = detail::solve4(J, R);
    double damping = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving, damping *= 0.5) {
      std::array<double, 4> trial{};
      for (std::size_t i = 0; i < 4; ++i) trial[i] = x[i] - damping * dx[i];
      if (!admissible(trial)) continue;
      try {
        double trial_estimate = 0.0;
        const auto Rt = residual_at(trial, &trial_estimate);
        const double nt = detail::max_norm(Rt);
        if (nt < norm) {
          x = trial;
          R = Rt;
          norm = nt;
          estimate = trial_estimate;
          moved = true;
          break;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::trapped && e.kind() != ErrorKind::accuracy &&
            e.kind() != ErrorKind::integration_failure) {
          throw;
        }
      }
    }
    if (!moved) break;
  }
  if (norm > target + estimate * scale) {
    fail(ErrorKind::no_solution, "shooting did not converge (residual " + std::to_string(norm) + " after " +
                                     std::to_string(iter) + " iterations)");
  }
  const auto plus = extract_asymptotics(s, detail::as_point(x), Sign::plus, T, tol);
  return {plus.data, reduced(detail::as_point(x)), iter, norm, std::max(estimate, plus.error_estimate)};
}

inline ScatteringData scattering_map(const ScaledSymbol& s, const ScatteringData& d_minus, double T,
                                     double tol = 1e-10) {
  return scattering_map_detail(s, d_minus, T, tol).out;
}

/// Default h grid 2^-3 .. 2^-9.
inline std::vector<double> default_h_grid() {
  std::vector<double> g;
  for (int k = 3; k <= 9; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

/// Seeded draws from the box r in [0.8, 1.2], rho in [-0.3, 0.3], theta in
/// [0, 2 pi), |omega| in [0.8, 1.2] with alternating sign.
inline std::vector<PhasePoint> standard_test_points(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  std::vector<PhasePoint> pts;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = uniform(0.8, 1.2), rho = uniform(-0.3, 0.3), theta = uniform(0.0, two_pi);
    const double omega = (i % 2 == 0 ? 1.0 : -1.0) * uniform(0.8, 1.2);
    pts.push_back({r, rho, {theta, omega}});
  }
  return pts;
}

struct RateReport {
  RateFit rho;
  RateFit theta;
  RateFit r;
  double max_error_estimate = 0.0;
};

/// Errors |rho^h_+- - rho_c,+-|, |theta^h_+- - theta_c,+-| and |r^h_+- - r_c,+-|,
/// each the sup over test points and both signs, fitted against h.
inline RateReport theorem_rates(const PerturbationProfile& profile, const BoundaryMetric& m,
                                std::span<const PhasePoint> points, std::span<const double> h_grid, double T,
                                double tol = 1e-10) {
  require(!points.empty() && h_grid.size() >= 2, ErrorKind::invalid_input, "rate harness needs points and >= 2 h values");
  const std::size_t per_h = points.size() * 2;
  std::vector<std::array<double, 4>> errs(h_grid.size() * per_h);
  parallel_for(errs.size(), [&](std::size_t task) {
    const std::size_t ih = task / per_h, ip = (task % per_h) / 2;
    const Sign sign = task % 2 == 0 ? Sign::plus : Sign::minus;
    const ScaledSymbol s{profile, m, h_grid[ih]};
    const auto a = extract_asymptotics_lift(s, points[ip], sign, T, tol);
    const auto c = detail::conic_asymptote_at(m, points[ip].r, points[ip].rho, points[ip].angular, 0.0, sign, tol);
    errs[task] = {std::abs(a.data.rho_as - c.rho_as),
                  std::abs(angle_difference(a.data.angular_as.theta, c.angular_as.theta)),
                  std::abs(a.data.r_as - c.r_as), a.error_estimate};
  });
  std::vector<double> hs(h_grid.begin(), h_grid.end()), e_rho(h_grid.size()), e_theta(h_grid.size()),
      e_r(h_grid.size());
  double est = 0.0;
  for (std::size_t task = 0; task < errs.size(); ++task) {
    const std::size_t ih = task / per_h;
    e_rho[ih] = std::max(e_rho[ih], errs[task][0]);
    e_theta[ih] = std::max(e_theta[ih], errs[task][1]);
    e_r[ih] = std::max(e_r[ih], errs[task][2]);
    est = std::max(est, errs[task][3]);
  }
  return {fit_rate(hs, e_rho), fit_rate(hs, e_theta), fit_rate(hs, e_r), est};
}

struct ComponentSample {
  double h = 0.0;
  double g = 0.0;   // (r_out + r_in) / h
  double s1 = 0.0;  // theta_out - theta_c,out
  double s2 = 0.0;  // (omega_out - omega_c,out) / h
};

struct SComponents {
  std::vector<ComponentSample> samples;
  RateFit g_fit;
  RateFit s1_fit;
  RateFit s2_fit;
};

/// Corrections of the true scattering map at the scaled point
/// (r/h, rho, theta, omega/h) relative to the conic map. Evaluated through the
/// equivalent rescaled problem: s_p(r/h, rho, theta, omega/h) equals
/// s_{p^h}(r, rho, theta, omega) with r and omega divided by h.
inline SComponents extract_s_components(const PerturbationProfile& profile, const BoundaryMetric& m,
                                        const ScatteringData& base, std::span<const double> h_grid, double T,
                                        double tol = 1e-10) {
  require(base.rho_as < 0.0 && base.angular_as.omega != 0.0, ErrorKind::domain,
          "base data need rho < 0 and omega != 0");
  require(h_grid.size() >= 2, ErrorKind::invalid_input, "component fits need >= 2 h values");
  const ScatteringData conic = conic_scattering_map(m, base, 1e-2 * tol);
  SComponents out;
  out.samples.resize(h_grid.size());
  parallel_for(h_grid.size(), [&](std::size_t i) {
    const ScaledSymbol s{profile, m, h_grid[i]};
    const auto d = scattering_map(s, base, T, tol);
    out.samples[i] = {h_grid[i], (d.r_as + base.r_as) / h_grid[i],
                      angle_difference(d.angular_as.theta, conic.angular_as.theta),
                      (d.angular_as.omega - conic.angular_as.omega) / h_grid[i]};
  });
  std::vector<double> hs, g, s1, s2;
  for (const auto& c : out.samples) {
    hs.push_back(c.h);
    g.push_back(std::abs(c.g));
    s1.push_back(std::abs(c.s1));
    s2.push_back(std::abs(c.s2));
  }
  out.g_fit = fit_rate(hs, g);
  out.s1_fit = fit_rate(hs, s1);
  out.s2_fit = fit_rate(hs, s2);
  return out;
}

// ---------------------------------------------------------------------------
// Leading-order transport: b0(t) = a o w_c(t) solves
//   d/dt b0 + H_{l0} b0 = 0,  l0(t) = q(theta, omega) / (r + t rho)^2,
// with H_l b = l_rho b_r - l_r b_rho + l_omega b_theta - l_theta b_omega.

/// Gaussian bump in (r, rho, theta, omega) with per-coordinate half widths;
/// the compact variant multiplies by a C-infinity cutoff supported in the
/// box of twice the half widths.
struct BumpSymbol {
  PhasePoint center{1.0, 0.0, {0.0, 1.0}};
  std::array<double, 4> half_width{0.2, 0.2, 0.2, 0.2};
  bool compact = false;

  double operator()(const PhasePoint& x) const {
    const std::array<double, 4> z{(x.r - center.r) / half_width[0], (x.rho - center.rho) / half_width[1],
                                  angle_difference(x.angular.theta, center.angular.theta) / half_width[2],
                                  (x.angular.omega - center.angular.omega) / half_width[3]};
    double e = 0.0;
    for (double v : z) e += v * v;
    double value = std::exp(-e);
    if (compact) {
      for (double v : z) {
        const double s = 0.5 * v;
        if (std::abs(s) >= 1.0) return 0.0;
        value *= std::exp(1.0 - 1.0 / (1.0 - s * s));
      }
    }
    return value;
  }
};

/// b0(t)(x) = a(w_c(t)(x)); exactly a(x) at t = 0.
template <class Symbol>
double transported_symbol(const BoundaryMetric& m, const Symbol& a, const PhasePoint& x, double t,
                          double tol = 1e-12) {
  const PhasePoint moved{x.r + t * x.rho, x.rho, x.angular};
  if (!(moved.r > 0.0)) fail(ErrorKind::coverage, "pullback point leaves the domain of w_c(t)");
  return a(detail::conic_flow_lift(m, moved, -t, tol));
}

struct TransportResult {
  double residual = 0.0;    // sup over the grid of |d_t b0 + H_{l0} b0|
  double peak = 0.0;        // sup of |b0(t)| on the grid
  double boundary = 0.0;    // sup of |b0(t)| on the grid faces
  std::size_t points = 0;
};

/// Finite-difference residual of the transport equation on a grid of
/// points_per_dim^4 nodes around w_c(t)^{-1}(center), spanning +-2.5 half
/// widths. Spatial steps are half_width / steps, the time step 1 / steps.
template <class Symbol>
TransportResult transport_check(const BoundaryMetric& m, const Symbol& a, const PhasePoint& center,
                                const std::array<double, 4>& half_width, double t, int steps,
                                bool compact_support = false, int points_per_dim = 5, double tol = 1e-12) {
  require(steps >= 1 && points_per_dim >= 2, ErrorKind::invalid_input, "transport grid needs steps >= 1");
  require(std::isfinite(t), ErrorKind::invalid_input, "transport time must be finite");
  for (double w : half_width) require(w > 0.0, ErrorKind::invalid_input, "half widths must be positive");
  const PhasePoint mid = conic_interaction_inverse(m, center, t, tol);

  auto b0 = [&](const PhasePoint& x, double time) { return transported_symbol(m, a, x, time, tol); };

  const std::size_t n = static_cast<std::size_t>(points_per_dim);
  const std::size_t total = n * n * n * n;
  std::vector<double> res(total), val(total);
  std::vector<char> face(total);
  const double dt = 1.0 / steps;
  std::array<double, 4> dz{};
  for (std::size_t i = 0; i < 4; ++i) dz[i] = half_width[i] / steps;

  parallel_for(total, [&](std::size_t idx) {
    std::array<double, 4> z{};
    std::size_t rem = idx;
    bool on_face = false;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t k = rem % n;
      rem /= n;
      on_face = on_face || k == 0 || k + 1 == n;
      const double u = -2.5 + 5.0 * static_cast<double>(k) / static_cast<double>(n - 1);
      z[i] = detail::as_array(mid)[i] + u * half_width[i];
    }
    const PhasePoint x = detail::as_point(z);
    auto shifted = [&](std::size_t i, double d) {
      auto zz = z;
      zz[i] += d;
      return detail::as_point(zz);
    };
    std::array<double, 4> grad{};
    for (std::size_t i = 0; i < 4; ++i) {
      grad[i] = (b0(shifted(i, dz[i]), t) - b0(shifted(i, -dz[i]), t)) / (2.0 * dz[i]);
    }
    const double bt = (b0(x, t + dt) - b0(x, t - dt)) / (2.0 * dt);
    const double q = angular_energy(m, x.angular);
    const double R = x.r + t * x.rho;
    if (!(R > 0.0)) fail(ErrorKind::coverage, "transport grid leaves r + t rho > 0");
    const double R2 = R * R, R3 = R2 * R;
    const double l_r = -2.0 * q / R3;
    const double l_rho = -2.0 * t * q / R3;
    const double l_theta = 0.5 * m.cometric.derivative(x.angular.theta) * x.angular.omega * x.angular.omega / R2;
    const double l_omega = m.h(x.angular.theta) * x.angular.omega / R2;
    const double H = l_rho * grad[0] - l_r * grad[1] + l_omega * grad[2] - l_theta * grad[3];
    res[idx] = std::abs(bt + H);
    val[idx] = std::abs(b0(x, t));
    face[idx] = on_face;
  });

  TransportResult out;
  out.points = total;
  for (std::size_t i = 0; i < total; ++i) {
    out.residual = std::max(out.residual, res[i]);
    out.peak = std::max(out.peak, val[i]);
    if (face[i]) out.boundary = std::max(out.boundary, val[i]);
  }
  if (compact_support && out.boundary > 1e-3 * out.peak) {
    fail(ErrorKind::coverage, "symbol support reaches the edge of the transport grid");
  }
  return out;
}

struct TransportConvergence {
  TransportResult coarse;
  TransportResult fine;
  double ratio = 0.0;
};

/// Residuals at `steps` and `2 steps`; second order means ratio ~ 4.
template <class Symbol>
TransportConvergence transport_convergence(const BoundaryMetric& m, const Symbol& a, const PhasePoint& center,
                                           const std::array<double, 4>& half_width, double t, int steps,
                                           bool compact_support = false) {
  TransportConvergence c;
  c.coarse = transport_check(m, a, center, half_width, t, steps, compact_support);
  c.fine = transport_check(m, a, center, half_width, t, 2 * steps, compact_support);
  c.ratio = c.fine.residual > 0.0 ? c.coarse.residual / c.fine.residual : std::numeric_limits<double>::infinity();
  return c;
}

}  // namespace conic_scatter
