#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "conic_scatter/conic_reference.hpp"
#include "oracles.hpp"

namespace cs = conic_scatter;
using std::numbers::pi;

namespace {

void expect_data(const cs::ScatteringData& d, double r, double rho, double theta, double omega, double tol) {
  EXPECT_NEAR(d.r_as, r, tol);
  EXPECT_NEAR(d.rho_as, rho, tol);
  EXPECT_NEAR(cs::angle_difference(d.angular_as.theta, theta), 0.0, tol);
  EXPECT_NEAR(d.angular_as.omega, omega, tol);
}

}  // namespace

TEST(ConicFlow, UnitCircleExample) {
  const auto m = cs::BoundaryMetric::constant(1.0);
  const auto x = cs::conic_flow_exact(m, {1.0, 0.0, {0.0, 1.0}}, 1.0);
  EXPECT_NEAR(x.r, std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(x.rho, 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(x.angular.theta, pi / 4, 1e-14);
  EXPECT_EQ(x.angular.omega, 1.0);
}

TEST(ConicFlow, ZeroTimeAndRadialBranch) {
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.2);
  const cs::PhasePoint x0{2.0, 0.5, {1.0, 0.7}};
  const auto same = cs::conic_flow_exact(m, x0, 0.0);
  EXPECT_EQ(same.r, x0.r);
  EXPECT_EQ(same.rho, x0.rho);
  EXPECT_EQ(same.angular.theta, x0.angular.theta);

  const auto radial = cs::conic_flow_exact(m, {2.0, 0.5, {1.0, 0.0}}, 3.0);
  EXPECT_DOUBLE_EQ(radial.r, 3.5);
  EXPECT_EQ(radial.angular.omega, 0.0);
  try {
    cs::conic_flow_exact(m, {1.0, -1.0, {1.0, 0.0}}, 2.0);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::domain);
  }
}

TEST(ConicFlow, AgreesWithBruteForceIntegration) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> r0(0.5, 3.0), rho0(-2.0, 2.0), th(0.0, 2 * pi), om(0.2, 2.0);
  const std::vector<cs::BoundaryMetric> metrics{cs::BoundaryMetric::constant(1.0),
                                                cs::BoundaryMetric::cosine(1.0, 0.4)};
  for (const auto& m : metrics) {
    auto h = [&](double x) { return m.h(x); };
    auto dh = [&](double x) { return m.cometric.derivative(x); };
    for (int k = 0; k < 10; ++k) {
      const cs::PhasePoint x0{r0(rng), rho0(rng), {th(rng), (k % 2 ? 1 : -1) * om(rng)}};
      for (double t : {-50.0, -7.5, 3.0, 50.0}) {
        const auto ref = oracle::conic_ode(h, dh, {x0.r, x0.rho, x0.angular.theta, x0.angular.omega}, t);
        const auto got = cs::detail::conic_flow_lift(m, x0, t, 1e-12);
        EXPECT_NEAR(got.r, ref[0], 1e-8 * std::max(1.0, ref[0]));
        EXPECT_NEAR(got.rho, ref[1], 1e-8);
        EXPECT_NEAR(got.angular.theta, ref[2], 1e-8);
        EXPECT_NEAR(got.angular.omega, ref[3], 1e-8);
      }
    }
  }
}

TEST(ConicFlow, ConservesAngularEnergy) {
  const auto m = cs::BoundaryMetric::cosine(1.3, 0.5);
  const cs::PhasePoint x0{1.0, -0.3, {0.4, 1.2}};
  const double q0 = cs::angular_energy(m, x0.angular);
  for (double t : {-20.0, -1.0, 0.5, 40.0}) {
    const auto x = cs::conic_flow_exact(m, x0, t, 1e-12);
    EXPECT_LE(std::abs(cs::angular_energy(m, x.angular) - q0), 1e-10);
    EXPECT_NEAR(cs::conic_energy(m, x), cs::conic_energy(m, x0), 1e-10);
  }
}

TEST(WaveData, UnitCircleExamples) {
  const auto m = cs::BoundaryMetric::constant(1.0);
  const cs::PhasePoint x0{1.0, 0.0, {0.0, 1.0}};
  expect_data(cs::conic_wave_data(m, x0, cs::Sign::plus), 0.0, 1.0, pi / 2, 1.0, 1e-14);
  expect_data(cs::conic_wave_data(m, x0, cs::Sign::minus), 0.0, -1.0, -pi / 2, 1.0, 1e-14);
  try {
    cs::conic_wave_data(m, {1.0, 0.0, {0.0, 0.0}}, cs::Sign::plus);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::degenerate);
  }
}

TEST(WaveData, GeodesicTimesDifferByPi) {
  for (double b : {-1e8, -3.0, -0.1, 0.0, 0.2, 5.0, 1e9}) {
    EXPECT_NEAR(cs::asymptotic_geodesic_time(b, cs::Sign::plus) - cs::asymptotic_geodesic_time(b, cs::Sign::minus),
                pi, 1e-15);
  }
}

TEST(WaveMap, ExampleAndErrors) {
  const auto m = cs::BoundaryMetric::constant(1.0);
  const auto x = cs::conic_wave_map(m, {0.0, -1.0, {0.0, 1.0}}, cs::Sign::minus);
  EXPECT_NEAR(x.r, 1.0, 1e-15);
  EXPECT_NEAR(x.rho, 0.0, 1e-15);
  EXPECT_NEAR(x.angular.theta, pi / 2, 1e-15);
  EXPECT_EQ(x.angular.omega, 1.0);
  try {
    cs::conic_wave_map(m, {0.0, 1.0, {0.0, 1.0}}, cs::Sign::minus);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::domain);
  }
}

TEST(WaveMap, RoundTripAndHomogeneity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> r0(0.3, 4.0), rho0(-3.0, 3.0), th(0.0, 2 * pi), om(0.2, 2.0);
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.3);
  for (int k = 0; k < 20; ++k) {
    const cs::PhasePoint x0{r0(rng), rho0(rng), {th(rng), (k % 2 ? 1 : -1) * om(rng)}};
    for (auto sign : {cs::Sign::plus, cs::Sign::minus}) {
      const auto d = cs::conic_wave_data(m, x0, sign);
      EXPECT_NEAR(0.5 * d.rho_as * d.rho_as, cs::conic_energy(m, x0), 1e-12);
      EXPECT_NEAR(cs::angular_energy(m, d.angular_as), cs::angular_energy(m, x0.angular),
                  1e-10 * cs::angular_energy(m, x0.angular));
      const auto back = cs::conic_wave_map(m, d, sign);
      EXPECT_LE(cs::point_discrepancy(back, x0), 1e-10);

      for (double lambda : {2.0, 3.0}) {
        const auto ds = cs::conic_wave_data(m, {lambda * x0.r, x0.rho, {x0.angular.theta, lambda * x0.angular.omega}},
                                            sign);
        EXPECT_NEAR(ds.r_as, lambda * d.r_as, 1e-10 * std::max(1.0, std::abs(ds.r_as)));
        EXPECT_NEAR(ds.rho_as, d.rho_as, 1e-10);
        EXPECT_NEAR(cs::angle_difference(ds.angular_as.theta, d.angular_as.theta), 0.0, 1e-10);
        EXPECT_NEAR(ds.angular_as.omega, lambda * d.angular_as.omega, 1e-10 * lambda);
      }
    }
  }
}

TEST(ScatteringMap, Examples) {
  const auto m1 = cs::BoundaryMetric::constant(1.0);
  expect_data(cs::conic_scattering_map(m1, {0.0, -1.0, {-pi / 2, 1.0}}), 0.0, 1.0, pi / 2, 1.0, 1e-12);
  const auto m2 = cs::BoundaryMetric::constant(2.0);
  expect_data(cs::conic_scattering_map(m2, {0.3, -1.0, {0.0, 1.0}}), -0.3, 1.0, pi / 2, 1.0, 1e-12);
  EXPECT_THROW(cs::conic_scattering_map(m1, {0.0, 1.0, {0.0, 1.0}}), cs::Error);
}

TEST(ScatteringMap, HomogeneousAndSelfConsistentOnVariableMetric) {
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.4);
  const cs::ScatteringData d{0.7, -1.3, {0.9, -0.8}};
  const auto s = cs::conic_scattering_map(m, d);
  const double lambda = 3.0;
  const auto sl = cs::conic_scattering_map(m, {lambda * d.r_as, d.rho_as, {d.angular_as.theta, lambda * d.angular_as.omega}});
  EXPECT_NEAR(sl.r_as, lambda * s.r_as, 1e-10);
  EXPECT_NEAR(sl.rho_as, s.rho_as, 1e-10);
  EXPECT_NEAR(cs::angle_difference(sl.angular_as.theta, s.angular_as.theta), 0.0, 1e-10);
  EXPECT_NEAR(sl.angular_as.omega, lambda * s.angular_as.omega, 1e-10);
}

TEST(WaveOperators, AreLimitsOfTheInteractionMap) {
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.3);
  const cs::PhasePoint x0{1.2, 0.4, {0.5, 0.9}};
  for (auto sign : {cs::Sign::plus, cs::Sign::minus}) {
    const auto d = cs::conic_wave_data(m, x0, sign);
    std::vector<double> log_t, log_e;
    for (double T : {1e2, 1e3, 1e4}) {
      const auto y = cs::conic_interaction_inverse(m, x0, cs::to_double(sign) * T);
      const double e = cs::data_discrepancy({y.r, y.rho, y.angular}, d);
      log_t.push_back(std::log(T));
      log_e.push_back(std::log(e));
    }
    const double slope = (log_e.back() - log_e.front()) / (log_t.back() - log_t.front());
    EXPECT_LE(slope, -0.9);
  }
}

TEST(WaveOperators, InteractionMapScaling) {
  const auto m = cs::BoundaryMetric::cosine(1.0, -0.25);
  const cs::PhasePoint x0{0.8, -0.6, {2.0, 1.1}};
  for (double t : {-5.0, 2.0, 30.0}) {
    const auto y = cs::conic_interaction_inverse(m, x0, t);
    for (double lambda : {2.0, 3.0}) {
      const auto ys =
          cs::conic_interaction_inverse(m, {lambda * x0.r, x0.rho, {x0.angular.theta, lambda * x0.angular.omega}}, lambda * t);
      EXPECT_NEAR(ys.r, lambda * y.r, 1e-9 * std::max(1.0, std::abs(ys.r)));
      EXPECT_NEAR(ys.rho, y.rho, 1e-9);
      EXPECT_NEAR(cs::angle_difference(ys.angular.theta, y.angular.theta), 0.0, 1e-9);
      EXPECT_NEAR(ys.angular.omega, lambda * y.angular.omega, 1e-9 * lambda);
    }
    const auto back = cs::conic_interaction(m, y, t);
    EXPECT_LE(cs::point_discrepancy(back, x0), 1e-10);
  }
}
