#pragma once

// Scattering matrix of the separable model: cone over a circle of radius a
// with a radial potential W(r). Each angular mode m decouples into
//   -u''/2 + ((nu^2 - 1/4)/(2 r^2) + W) u = lambda u,   nu = |m| / a,
// whose phase shift delta_m against the exact cone gives
//   S(lambda) e^{i m theta} = e^{i sigma_m} e^{i m theta},  sigma_m = -pi (nu + 1/2) + 2 delta_m.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "conic_scatter/errors.hpp"
#include "conic_scatter/fft.hpp"
#include "conic_scatter/ode.hpp"
#include "conic_scatter/parallel.hpp"
#include "conic_scatter/phase_geometry.hpp"

namespace conic_scatter {

enum class PotentialKind { zero, lorentzian, regularized_power, gaussian };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::lorentzian: return "lorentzian";
    case PotentialKind::regularized_power: return "regularized-power";
    case PotentialKind::gaussian: return "gaussian";
  }
  return "unknown";
}

/// Radial potentials with closed-form tails:
///   lorentzian        c / (1 + r^2)
///   regularized power c (1 + r^2)^{-(1+mu)/2}
///   gaussian          c exp(-r^2)
struct RadialPotential {
  PotentialKind kind = PotentialKind::zero;
  double strength = 0.0;
  double mu = 1.0;

  static RadialPotential zero() { return {}; }
  static RadialPotential lorentzian(double c) { return {PotentialKind::lorentzian, c, 1.0}; }
  static RadialPotential gaussian(double c) { return {PotentialKind::gaussian, c, 1.0}; }
  static RadialPotential regularized_power(double c, double mu) {
    require(std::isfinite(mu) && mu > 0.0, ErrorKind::invalid_input, "potential decay rate must be positive");
    return {PotentialKind::regularized_power, c, mu};
  }

  bool is_zero() const { return kind == PotentialKind::zero || strength == 0.0; }

  double operator()(double r) const {
    switch (kind) {
      case PotentialKind::zero: return 0.0;
      case PotentialKind::lorentzian: return strength / (1.0 + r * r);
      case PotentialKind::regularized_power: return strength * std::pow(1.0 + r * r, -0.5 * (1.0 + mu));
      case PotentialKind::gaussian: return strength * std::exp(-r * r);
    }
    return 0.0;
  }

  /// int_R^infty W(r) dr.
  double tail_integral(double R) const {
    switch (kind) {
      case PotentialKind::zero: return 0.0;
      case PotentialKind::lorentzian: return strength * (0.5 * std::numbers::pi - std::atan(R));
      case PotentialKind::regularized_power:
        // u = 1/(1+r^2) turns the integral into B_x(mu/2, 1/2) / 2, x = 1/(1+R^2)
        return strength * 0.5 * boost::math::beta(0.5 * mu, 0.5, 1.0 / (1.0 + R * R));
      case PotentialKind::gaussian: return strength * 0.5 * std::sqrt(std::numbers::pi) * std::erfc(R);
    }
    return 0.0;
  }

  /// Decay audit |W(r)| <= |c| (1 + r)^{-1-mu} on 1000 log-spaced radii in [1, 1e6].
  void audit() const {
    require(std::isfinite(strength), ErrorKind::invalid_input, "potential strength must be finite");
    if (is_zero()) return;
    const double decay = kind == PotentialKind::gaussian ? 1.0 : mu;
    for (int i = 0; i < 1000; ++i) {
      const double r = std::pow(10.0, 6.0 * i / 999.0);
      const double bound = 2.0 * std::pow(2.0, 1.0 + decay) * std::abs(strength) * std::pow(1.0 + r, -1.0 - decay);
      require(std::abs((*this)(r)) <= bound, ErrorKind::invalid_input, "potential violates its decay envelope");
    }
  }
};

struct RadialProblem {
  double a = 1.0;
  double nu = 0.0;
  RadialPotential W;
  double lambda = 0.5;

  double k() const { return std::sqrt(2.0 * lambda); }

  void validate() const {
    require(std::isfinite(a) && a > 0.0, ErrorKind::invalid_input, "circle radius must be positive");
    require(std::isfinite(nu) && nu >= 0.0, ErrorKind::invalid_input, "Bessel order must be nonnegative");
    require(std::isfinite(lambda) && lambda > 0.0, ErrorKind::invalid_input, "energy must be positive");
  }
};

/// Smallest radius (doubling from 10) with |W| <= tol lambda, and at least
/// 4 nu / k + 20 so the matching point lies well past the turning point.
inline double default_match_radius(const RadialProblem& p, double tol) {
  double r = 10.0;
  while (std::abs(p.W(r)) > tol * p.lambda) {
    r *= 2.0;
    require(r < 1e8, ErrorKind::numeric, "potential too long-ranged for the requested tolerance");
  }
  return std::max(r, 4.0 * p.nu / p.k() + 20.0);
}

/// Phase phi at r_match of the regular solution, written as u = R sin(phi),
/// u' = k R cos(phi). Inside the centrifugal barrier (r < nu / (2k), nu >= 2)
/// phi would be tiny, so there the log-derivative z = r u'/u is integrated in
/// ln r instead,
///   dz/d(ln r) = z - z^2 + nu^2 - 1/4 + r^2 (2 W - k^2),
/// which has no zeros to cross. Beyond it the phase is integrated as
/// psi = phi - k r, which stays bounded. Returns phi unreduced.
inline double regular_solution_phase(const RadialProblem& p, double r_match, double ode_tol) {
  p.validate();
  const double k = p.k();
  const double nu = p.nu;
  const double r_min = 1e-4 * std::min(1.0, 1.0 / std::max(nu, 1e-300));
  require(r_match > r_min, ErrorKind::invalid_input, "matching radius must exceed the start radius");
  // Frobenius start u = r^s (1 + c2 r^2), s = nu + 1/2
  const double s = nu + 0.5;
  const double c2 = (2.0 * p.W(0.0) - k * k) / (4.0 * (nu + 1.0));
  const double centrifugal = nu * nu - 0.25;
  using State = std::array<double, 1>;

  double r = r_min;
  State z{s + 2.0 * c2 * r_min * r_min / (1.0 + c2 * r_min * r_min)};
  const double r_switch = nu >= 2.0 ? std::min(0.5 * nu / k, 0.5 * r_match) : r_min;
  if (r_switch > r_min) {
    auto riccati = [&](const State& x, State& dx, double log_r) {
      const double rr = std::exp(log_r);
      dx[0] = x[0] - x[0] * x[0] + centrifugal + rr * rr * (2.0 * p.W(rr) - k * k);
    };
    double log_r = std::log(r_min);
    AdaptiveIntegrator<1> barrier(ode_tol);
    barrier.advance(riccati, z, log_r, std::log(r_switch));
    r = r_switch;
    require(z[0] > 0.0, ErrorKind::numeric, "regular solution turned over inside the barrier");
  }

  auto rhs = [&](const State& x, State& dx, double rr) {
    const double sn = std::sin(x[0] + k * rr);
    dx[0] = -(centrifugal / (rr * rr) + 2.0 * p.W(rr)) / k * sn * sn;
  };
  State psi{std::atan2(k * r, z[0]) - k * r};
  AdaptiveIntegrator<1> outer(ode_tol);
  outer.advance(rhs, psi, r, r_match);
  return psi[0] + k * r_match;
}

/// Phase shift of mode order nu against the free cone, with the convention
/// u ~ cos(k r - nu pi / 2 - pi / 4 + delta) at infinity. tol is the phase
/// tolerance; the residual tail -(1/k) int_{r_match}^infty W is added in
/// closed form. Returns delta in (-pi/2, pi/2] (it is defined mod pi).
inline double solve_phase_shift(const RadialProblem& p, double r_match, double tol) {
  p.validate();
  require(tol > 0.0 && std::isfinite(tol), ErrorKind::invalid_input, "phase tolerance must be positive");
  require(std::isfinite(r_match) && r_match > 0.0, ErrorKind::invalid_input, "matching radius must be positive");
  const double k = p.k();
  // the turning-point region amplifies local errors roughly in proportion to nu
  const double ode_tol = std::clamp(1e-4 * tol / (1.0 + 0.05 * p.nu), 1e-13, 1e-8);
  const double phi = regular_solution_phase(p, r_match, ode_tol);
  const double x = k * r_match;
  const double sr = std::sqrt(r_match);
  const double J = boost::math::cyl_bessel_j(p.nu, x), Jp = boost::math::cyl_bessel_j_prime(p.nu, x);
  const double Y = boost::math::cyl_neumann(p.nu, x), Yp = boost::math::cyl_neumann_prime(p.nu, x);
  const double j = sr * J, jp = J / (2.0 * sr) + sr * k * Jp;
  const double yh = sr * Y, yp = Y / (2.0 * sr) + sr * k * Yp;
  const double sn = std::sin(phi), cs = std::cos(phi);
  const double num = sn * jp - k * cs * j;
  const double den = sn * yp - k * cs * yh;
  require(std::isfinite(num) && std::isfinite(den) && (num != 0.0 || den != 0.0), ErrorKind::numeric,
          "phase-shift matching failed");
  double delta = std::atan(num / den);
  if (den == 0.0) delta = 0.5 * std::numbers::pi;
  delta -= p.W.tail_integral(r_match) / k;
  // back to (-pi/2, pi/2]
  delta = std::remainder(delta, std::numbers::pi);
  if (delta <= -0.5 * std::numbers::pi) delta += std::numbers::pi;
  return delta;
}

inline double solve_phase_shift(const RadialProblem& p, double tol) {
  return solve_phase_shift(p, default_match_radius(p, tol), tol);
}

/// Exact-cone phase -pi (nu + 1/2).
inline double exact_cone_phase(double nu) { return -std::numbers::pi * (nu + 0.5); }

struct ModePhase {
  long m = 0;
  double sigma = 0.0;
  double delta = 0.0;
};

/// Diagonal S(lambda) on the modes |m| <= m_max, stored for m = -m_max..m_max.
struct ModePhaseTable {
  double lambda = 0.5;
  double a = 1.0;
  long m_max = 0;
  std::vector<ModePhase> modes;

  double k() const { return std::sqrt(2.0 * lambda); }

  const ModePhase& mode(long m) const {
    require(std::abs(m) <= m_max, ErrorKind::invalid_input, "mode outside the table");
    return modes[static_cast<std::size_t>(m + m_max)];
  }
  double sigma(long m) const { return mode(m).sigma; }

  /// sigma_{m+1} - sigma_m, with the 2 delta part reduced to (-pi, pi] since
  /// delta is only defined mod pi.
  double phase_increment(long m) const {
    const double dnu = (std::abs(m + 1) - std::abs(m)) / a;
    return -std::numbers::pi * dnu + std::remainder(2.0 * (mode(m + 1).delta - mode(m).delta), two_pi);
  }

  /// S(lambda)^{-1}: conjugate phases.
  ModePhaseTable inverse() const {
    ModePhaseTable t = *this;
    for (auto& md : t.modes) {
      md.sigma = -md.sigma;
      md.delta = -md.delta;
    }
    return t;
  }

  /// Shifting the radial origin by tau multiplies S by the global phase e^{2 i k tau}.
  ModePhaseTable translated(double tau) const {
    ModePhaseTable t = *this;
    for (auto& md : t.modes) md.sigma += 2.0 * k() * tau;
    return t;
  }
};

/// Phase table for |m| <= m_max; modes are solved in parallel, each with its
/// own matching radius, and mirrored to m < 0 (W is radial).
inline ModePhaseTable build_smatrix(double a, const RadialPotential& W, double lambda, long m_max, double tol) {
  require(m_max >= 10, ErrorKind::invalid_input, "m_max must be at least 10");
  require(std::isfinite(lambda) && lambda > 0.0, ErrorKind::invalid_input, "energy must be positive");
  require(std::isfinite(a) && a > 0.0, ErrorKind::invalid_input, "circle radius must be positive");
  W.audit();
  ModePhaseTable t{lambda, a, m_max, std::vector<ModePhase>(static_cast<std::size_t>(2 * m_max + 1))};
  std::vector<double> delta(static_cast<std::size_t>(m_max + 1), 0.0);
  parallel_for(delta.size(), [&](std::size_t m) {
    const RadialProblem p{a, static_cast<double>(m) / a, W, lambda};
    delta[m] = solve_phase_shift(p, tol);
  });
  for (long m = -m_max; m <= m_max; ++m) {
    const double nu = static_cast<double>(std::abs(m)) / a;
    const double d = delta[static_cast<std::size_t>(std::abs(m))];
    t.modes[static_cast<std::size_t>(m + m_max)] = {m, exact_cone_phase(nu) + 2.0 * d, d};
  }
  return t;
}

/// Multiplies Fourier coefficient m of the grid function u by e^{i sigma_m}.
/// The grid must have at least 4 m_max points and u must be band-limited to
/// |m| <= m_max (out-of-band l2 norm below 1e-12 of the total).
inline std::vector<std::complex<double>> apply_smatrix(const ModePhaseTable& t,
                                                       std::span<const std::complex<double>> u) {
  const std::size_t n = u.size();
  require(n >= static_cast<std::size_t>(4 * t.m_max), ErrorKind::invalid_input, "grid needs at least 4 m_max points");
  FourierTransform fft(n);
  auto c = fft.coefficients(u);
  double total = 0.0, leak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const long m = k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
    const double e = std::norm(c[k]);
    total += e;
    if (std::abs(m) > t.m_max) {
      leak += e;
      c[k] = 0.0;
    } else {
      c[k] *= std::polar(1.0, t.sigma(m));
    }
  }
  require(leak <= 1e-24 * total, ErrorKind::spectral_leak,
          "input is not band-limited to |m| <= " + std::to_string(t.m_max));
  return fft.synthesize(c);
}

}  // namespace conic_scatter
