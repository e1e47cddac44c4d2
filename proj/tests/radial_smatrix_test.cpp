#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "conic_scatter/rate_fit.hpp"
#include "conic_scatter/radial_smatrix.hpp"

using namespace conic_scatter;
using cplx = std::complex<double>;

namespace {

constexpr double pi = std::numbers::pi;

// Hankel's large-argument expansion: J_nu(x) = sqrt(2/(pi x)) (P cos chi - Q sin chi),
// chi = x - nu pi/2 - pi/4. Returns the phase of sqrt(r) J_nu(k r) in the
// u = R sin(phi), u' = k R cos(phi) representation, modulo pi.
double hankel_phase(double nu, double k, double r) {
  const auto PQ = [nu](double x, double& P, double& Q, double& Pp, double& Qp) {
    const double mu4 = 4.0 * nu * nu;
    P = 1.0, Q = 0.0, Pp = 0.0, Qp = 0.0;
    double coef = 1.0;
    for (int j = 1; j <= 30; ++j) {
      coef *= (mu4 - (2.0 * j - 1) * (2.0 * j - 1)) / (j * 8.0);
      const double term = coef / std::pow(x, j);
      if (std::abs(term) < 1e-18) break;
      const double sign = ((j / 2) % 2 == 0) ? 1.0 : -1.0;
      const double dterm = -j * term / x;
      if (j % 2 == 0) {
        P += sign * term;
        Pp += sign * dterm;
      } else {
        Q += sign * term;
        Qp += sign * dterm;
      }
    }
  };
  const double x = k * r;
  double P, Q, Pp, Qp;
  PQ(x, P, Q, Pp, Qp);
  const double chi = x - 0.5 * nu * pi - 0.25 * pi;
  // sqrt(r) J(kr) is proportional to f(x) = P cos chi - Q sin chi
  const double f = P * std::cos(chi) - Q * std::sin(chi);
  const double fp = Pp * std::cos(chi) - P * std::sin(chi) - Qp * std::sin(chi) - Q * std::cos(chi);
  // u' = k f'(x), so tan(phi) = k u / u' = f / f'
  return std::atan2(f, fp);
}

double mod_pi_distance(double a, double b) { return std::abs(std::remainder(a - b, pi)); }

RadialProblem problem(double nu, RadialPotential W = RadialPotential::zero(), double lambda = 0.5) {
  return {1.0, nu, W, lambda};
}

std::vector<cplx> band_limited(std::mt19937_64& rng, std::size_t n, long m_max) {
  std::normal_distribution<double> g;
  std::vector<cplx> c(n, 0.0);
  for (long m = -m_max; m <= m_max; ++m) c[frequency_index(m, n)] = {g(rng), g(rng)};
  FourierTransform fft(n);
  return fft.synthesize(c);
}

double l2(const std::vector<cplx>& u) {
  double s = 0.0;
  for (const auto& z : u) s += std::norm(z);
  return std::sqrt(s);
}

const RadialPotential lorentz = RadialPotential::lorentzian(-0.5);

}  // namespace

TEST(RadialPotential, TailIntegralsMatchQuadrature) {
  boost::math::quadrature::exp_sinh<double> integrator;
  for (const auto& W : {RadialPotential::lorentzian(-0.5), RadialPotential::regularized_power(0.8, 0.5),
                        RadialPotential::regularized_power(1.3, 1.5), RadialPotential::gaussian(1.0)}) {
    for (double R : {0.5, 3.0, 40.0}) {
      const double numeric = integrator.integrate([&](double s) { return W(R + s); });
      EXPECT_NEAR(W.tail_integral(R), numeric, 1e-10 * (1.0 + std::abs(numeric))) << to_string(W.kind) << " R=" << R;
    }
  }
  EXPECT_EQ(RadialPotential::zero().tail_integral(5.0), 0.0);
}

TEST(RadialPotential, AuditAcceptsBuiltIns) {
  EXPECT_NO_THROW(lorentz.audit());
  EXPECT_NO_THROW(RadialPotential::gaussian(2.0).audit());
  EXPECT_NO_THROW(RadialPotential::regularized_power(0.8, 0.5).audit());
  EXPECT_THROW(RadialPotential::regularized_power(1.0, 0.0), Error);
}

TEST(PhaseShift, FreeConeGivesZero) {
  for (double nu : {0.0, 0.5, 1.0, 5.0, 20.0, 40.0, 200.0}) {
    EXPECT_NEAR(solve_phase_shift(problem(nu), 1e-7), 0.0, 1e-7) << "nu=" << nu;
  }
}

TEST(PhaseShift, FreePhaseMatchesHankelExpansion) {
  const double k = 1.0;
  for (double nu : {0.0, 1.0, 5.0, 20.0, 40.0}) {
    const double R = 4000.0;
    const double phi = regular_solution_phase(problem(nu), R, 1e-11);
    EXPECT_LT(mod_pi_distance(phi, hankel_phase(nu, k, R)), 1e-6) << "nu=" << nu;
  }
}

TEST(PhaseShift, HankelOracleAgreesWithStdBessel) {
  // the oracle itself against libstdc++'s independent Bessel routines
  for (double nu : {0.0, 3.0, 20.0}) {
    const double r = 600.0, k = 1.0;
    const double J = std::cyl_bessel_j(nu, k * r);
    const double dJ = nu / (k * r) * J - std::cyl_bessel_j(nu + 1.0, k * r);
    const double u = std::sqrt(r) * J, up = J / (2.0 * std::sqrt(r)) + std::sqrt(r) * k * dJ;
    EXPECT_LT(mod_pi_distance(std::atan2(k * u, up), hankel_phase(nu, k, r)), 1e-9) << "nu=" << nu;
  }
}

TEST(PhaseShift, AttractiveLorentzianReference) {
  // reference from an independent DOP853 integration at rtol 1e-13 with the
  // same closed-form tail correction, uncertainty ~3e-7
  const double reference = 0.5496530;
  const double d1 = solve_phase_shift(problem(1.0, lorentz), 1e3, 1e-7);
  const double d2 = solve_phase_shift(problem(1.0, lorentz), 4e3, 1e-7);
  EXPECT_NEAR(d1, d2, 1e-6);
  EXPECT_NEAR(d1, reference, 1e-6);
  EXPECT_NEAR(d2, reference, 1e-6);
}

TEST(PhaseShift, TailCorrectionRemovesMatchRadiusDependence) {
  const auto W = RadialPotential::regularized_power(0.8, 1.5);
  const double d1 = solve_phase_shift(problem(3.0, W), 300.0, 1e-8);
  const double d2 = solve_phase_shift(problem(3.0, W), 3000.0, 1e-8);
  EXPECT_NEAR(d1, d2, 1e-6);
}

TEST(PhaseShift, RepulsiveShiftIsNegative) {
  EXPECT_LT(solve_phase_shift(problem(0.0, RadialPotential::gaussian(1.0)), 1e-6), 0.0);
  EXPECT_GT(solve_phase_shift(problem(0.0, RadialPotential::gaussian(-1.0)), 1e-6), 0.0);
}

TEST(PhaseShift, RejectsBadInput) {
  EXPECT_THROW(solve_phase_shift(problem(-1.0), 1e-6), Error);
  EXPECT_THROW(solve_phase_shift({1.0, 1.0, lorentz, 0.0}, 1e-6), Error);
  EXPECT_THROW(solve_phase_shift(problem(1.0), 100.0, 0.0), Error);
  EXPECT_THROW(solve_phase_shift(problem(1.0), 1e-6, 1e-6), Error);
}

TEST(SMatrix, FreeConeIncrements) {
  for (double a : {1.0, 2.0}) {
    const auto t = build_smatrix(a, RadialPotential::zero(), 0.5, 40, 1e-7);
    for (long m = 1; m < 40; ++m) EXPECT_NEAR(t.phase_increment(m), -pi / a, 1e-6) << "a=" << a << " m=" << m;
    for (long m = -40; m <= 40; ++m) {
      const double nu = std::abs(m) / a;
      EXPECT_LT(std::abs(std::remainder(t.sigma(m) - exact_cone_phase(nu), 2.0 * pi)), 1e-6);
    }
  }
}

TEST(SMatrix, SymmetricInM) {
  const auto t = build_smatrix(1.0, lorentz, 0.5, 12, 1e-6);
  ASSERT_EQ(t.modes.size(), 25u);
  for (long m = 0; m <= 12; ++m) {
    EXPECT_EQ(t.sigma(m), t.sigma(-m));
    EXPECT_EQ(t.mode(m).m, m);
  }
}

TEST(SMatrix, ShortRangeIncrementsApproachGeodesicShift) {
  const std::vector<RadialPotential> potentials{lorentz, RadialPotential::gaussian(1.0),
                                                RadialPotential::regularized_power(0.8, 1.5)};
  for (const auto& W : potentials) {
    for (double a : {1.0, 2.0}) {
      const auto t = build_smatrix(a, W, 0.5, 201, 1e-6);
      EXPECT_LT(std::abs(t.phase_increment(200) + pi / a), 1e-3) << to_string(W.kind) << " a=" << a;
    }
  }
}

TEST(SMatrix, IncrementDeviationDecaysInM) {
  // |dsigma_m + pi| ~ C m^{-mu'} with mu' > 0, fitted on m = 8..128
  const std::vector<RadialPotential> potentials{lorentz, RadialPotential::regularized_power(0.8, 1.5),
                                                RadialPotential::regularized_power(-0.6, 0.5)};
  for (const auto& W : potentials) {
    std::vector<double> ms, devs;
    for (long m = 8; m <= 128; m *= 2) {
      const double d0 = solve_phase_shift(problem(static_cast<double>(m), W), 1e-8);
      const double d1 = solve_phase_shift(problem(static_cast<double>(m + 1), W), 1e-8);
      ms.push_back(static_cast<double>(m));
      devs.push_back(std::abs(std::remainder(2.0 * (d1 - d0), 2.0 * pi)));
    }
    const auto fit = fit_rate(ms, devs);
    ASSERT_TRUE(fit.valid()) << to_string(W.kind);
    EXPECT_LT(fit.slope, -0.5) << to_string(W.kind);
  }
}

TEST(SMatrix, InverseAndTranslation) {
  const auto t = build_smatrix(2.0, lorentz, 0.5, 20, 1e-6);
  const auto inv = t.inverse();
  const auto moved = t.translated(0.37);
  for (long m = -20; m <= 20; ++m) EXPECT_EQ(inv.sigma(m), -t.sigma(m));
  const double global = moved.sigma(0) - t.sigma(0);
  EXPECT_NEAR(global, 2.0 * t.k() * 0.37, 1e-14);
  for (long m = 0; m < 20; ++m) {
    EXPECT_NEAR(moved.phase_increment(m), t.phase_increment(m), 1e-12);
    EXPECT_NEAR(moved.sigma(m) - t.sigma(m), global, 1e-12);
  }
}

TEST(SMatrix, RejectsBadInput) {
  EXPECT_THROW(build_smatrix(1.0, lorentz, 0.5, 5, 1e-6), Error);
  EXPECT_THROW(build_smatrix(0.0, lorentz, 0.5, 20, 1e-6), Error);
  EXPECT_THROW(build_smatrix(1.0, lorentz, -1.0, 20, 1e-6), Error);
}

class ApplySMatrix : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { table_ = new ModePhaseTable(build_smatrix(1.0, lorentz, 0.5, 32, 1e-6)); }
  static void TearDownTestSuite() { delete table_; }
  static ModePhaseTable* table_;
};
ModePhaseTable* ApplySMatrix::table_ = nullptr;

TEST_F(ApplySMatrix, ModesAreEigenvectors) {
  const std::size_t n = 256;
  for (long m : {-32L, -7L, 0L, 3L, 32L}) {
    std::vector<cplx> u(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = std::polar(1.0, 2.0 * pi * m * j / n);
    const auto v = apply_smatrix(*table_, u);
    const cplx phase = std::polar(1.0, table_->sigma(m));
    for (std::size_t j = 0; j < n; ++j) EXPECT_LT(std::abs(v[j] - phase * u[j]), 1e-12);
  }
}

TEST_F(ApplySMatrix, PreservesNorm) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = band_limited(rng, 128, 32);
    const auto v = apply_smatrix(*table_, u);
    EXPECT_NEAR(l2(v) / l2(u), 1.0, 1e-12);
  }
}

TEST_F(ApplySMatrix, InverseUndoes) {
  std::mt19937_64 rng(5);
  const auto u = band_limited(rng, 128, 32);
  const auto w = apply_smatrix(table_->inverse(), apply_smatrix(*table_, u));
  for (std::size_t j = 0; j < u.size(); ++j) EXPECT_LT(std::abs(w[j] - u[j]), 1e-12);
}

TEST_F(ApplySMatrix, SpectralLeakAndGridSize) {
  std::vector<cplx> u(128);
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = std::polar(1.0, 2.0 * pi * 40 * j / 128.0);
  try {
    apply_smatrix(*table_, u);
    FAIL() << "expected spectral leak";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::spectral_leak);
  }
  EXPECT_THROW(apply_smatrix(*table_, std::vector<cplx>(100, 1.0)), Error);
}

TEST(ApplySMatrixPacket, FreeConeMovesPacketAntipodally) {
  const long m_max = 256;
  const std::size_t n = 4 * m_max;
  const auto t = build_smatrix(1.0, RadialPotential::zero(), 0.5, m_max, 1e-7);
  const double theta0 = 1.1, width = 0.15;
  // real Gaussian packet, built from its band-limited Fourier series
  std::vector<cplx> c(n, 0.0);
  for (long m = -m_max; m <= m_max; ++m) {
    c[frequency_index(m, n)] = std::exp(-0.5 * width * width * m * m) * std::polar(1.0, -m * theta0);
  }
  FourierTransform fft(n);
  const auto u = fft.synthesize(c);
  const auto v = apply_smatrix(t, u);
  cplx mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += std::norm(v[j]) * std::polar(1.0, 2.0 * pi * j / n);
  const double centre = std::arg(mean);
  const double cell = 2.0 * pi / n;
  EXPECT_LT(std::abs(angle_difference(centre, theta0 + pi)), 2.0 * cell);
}
