#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "conic_scatter/conic_reference.hpp"
#include "conic_scatter/phase_geometry.hpp"

namespace cs = conic_scatter;
using std::numbers::pi;

TEST(AngularEnergy, HandValues) {
  EXPECT_DOUBLE_EQ(cs::angular_energy(cs::BoundaryMetric::constant(2.0), {0.3, 3.0}), 1.125);
  EXPECT_DOUBLE_EQ(cs::angular_energy(cs::BoundaryMetric::constant(1.0), {0.0, 1.0}), 0.5);
  EXPECT_EQ(cs::angular_energy(cs::BoundaryMetric::cosine(1.0, 0.4), {1.7, 0.0}), 0.0);
}

TEST(AngularEnergy, RejectsNonFinite) {
  const auto m = cs::BoundaryMetric::constant(1.0);
  try {
    cs::angular_energy(m, {std::nan(""), 1.0});
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::invalid_input);
  }
}

TEST(BoundaryMetric, TabulatedInterpolatesSamples) {
  std::vector<double> samples;
  for (int j = 0; j < 8; ++j) samples.push_back(1.0 + 0.3 * std::cos(2.0 * pi * j / 8.0) + 0.1 * std::sin(4.0 * pi * j / 8.0));
  const auto m = cs::BoundaryMetric::tabulated(samples);
  for (int j = 0; j < 8; ++j) EXPECT_NEAR(m.h(2.0 * pi * j / 8.0), samples[j], 1e-13);
  // band-limited input is reproduced between the nodes too
  EXPECT_NEAR(m.h(0.37), 1.0 + 0.3 * std::cos(0.37) + 0.1 * std::sin(0.74), 1e-13);
}

TEST(BoundaryMetric, RejectsNonPositiveCometric) {
  const std::vector<double> samples{1.0, -0.5, 1.0, 1.0};
  EXPECT_THROW(cs::BoundaryMetric::tabulated(samples), cs::Error);
  EXPECT_THROW(cs::BoundaryMetric::cosine(1.0, 1.2), cs::Error);
}

TEST(PoissonBracket, CanonicalPairAndAntisymmetry) {
  const cs::PhasePoint x{1.3, -0.4, {0.7, 1.1}};
  auto r = [](const cs::PhasePoint& p) { return p.r; };
  auto rho = [](const cs::PhasePoint& p) { return p.rho; };
  EXPECT_NEAR(cs::poisson_bracket(r, rho, x, 1e-3), 1.0, 1e-10);
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.3);
  auto pc = [&](const cs::PhasePoint& p) { return cs::conic_energy(m, p); };
  EXPECT_EQ(cs::poisson_bracket(pc, pc, x, 1e-3), 0.0);
}

TEST(PoissonBracket, AngularEnergyCommutesWithConicHamiltonian) {
  const auto m = cs::BoundaryMetric::cosine(1.5, 0.4);
  auto q = [&](const cs::PhasePoint& p) { return cs::angular_energy(m, p.angular); };
  auto pc = [&](const cs::PhasePoint& p) { return cs::conic_energy(m, p); };
  const cs::PhasePoint x{1.2, 0.3, {0.5, 0.8}};
  EXPECT_LT(std::abs(cs::poisson_bracket(q, pc, x, 1e-3)), 1e-12);
  // p_c itself does not commute with r
  auto r = [](const cs::PhasePoint& p) { return p.r; };
  EXPECT_NEAR(cs::poisson_bracket(r, pc, x, 1e-3), x.rho, 1e-9);
}

TEST(GeodesicFlow, RoundCircleRotates) {
  for (double a : {1.0, 2.0, 0.7}) {
    const auto m = cs::BoundaryMetric::constant(a);
    const auto out = cs::geodesic_flow(m, {0.2, 1.5}, 0.9, 1e-10);
    EXPECT_NEAR(out.theta, 0.2 + 0.9 / a, 1e-12);
    EXPECT_EQ(out.omega, 1.5);
    const auto back = cs::geodesic_flow(m, {0.2, -1.5}, 0.9, 1e-10);
    EXPECT_NEAR(cs::angle_difference(back.theta, 0.2 - 0.9 / a), 0.0, 1e-12);
  }
}

TEST(GeodesicFlow, ZeroTimeIsIdentity) {
  const auto m = cs::BoundaryMetric::cosine(1.0, 0.5);
  const auto out = cs::geodesic_flow(m, {1.0, 2.0}, 0.0, 1e-10);
  EXPECT_EQ(out.theta, 1.0);
  EXPECT_EQ(out.omega, 2.0);
}

TEST(GeodesicFlow, DegenerateDirection) {
  try {
    cs::geodesic_flow(cs::BoundaryMetric::constant(1.0), {0.0, 0.0}, 1.0);
    FAIL();
  } catch (const cs::Error& e) {
    EXPECT_EQ(e.kind(), cs::ErrorKind::degenerate);
  }
}

class GeodesicProperties : public ::testing::Test {
 protected:
  std::mt19937_64 rng{12345};
  std::uniform_real_distribution<double> theta{0.0, 2.0 * pi};
  std::uniform_real_distribution<double> omega{0.3, 3.0};
  std::uniform_real_distribution<double> sigma{-4.0, 4.0};
  std::vector<cs::BoundaryMetric> metrics{
      cs::BoundaryMetric::cosine(1.0, 0.5),
      cs::BoundaryMetric::cosine(2.0, -0.3),
      cs::BoundaryMetric{cs::TrigSeries(1.0, {0.2, 0.1}, {0.0, -0.15}), cs::TrigSeries(1.0)},
  };
  static constexpr double tol = 1e-10;
};

TEST_F(GeodesicProperties, ConservationGroupLawReversibilityHomogeneity) {
  for (const auto& m : metrics) {
    for (int k = 0; k < 10; ++k) {
      const cs::AngularPoint p{theta(rng), (k % 2 ? 1.0 : -1.0) * omega(rng)};
      const double s1 = sigma(rng), s2 = sigma(rng);
      const auto a = cs::detail::geodesic_flow_lift(m, p, s1, tol);
      EXPECT_LE(std::abs(cs::angular_energy(m, a) - cs::angular_energy(m, p)), 10 * tol * std::abs(s1));

      const auto ab = cs::detail::geodesic_flow_lift(m, a, s2, tol);
      const auto direct = cs::detail::geodesic_flow_lift(m, p, s1 + s2, tol);
      EXPECT_LE(std::abs(ab.theta - direct.theta), 10 * tol);
      EXPECT_LE(std::abs(ab.omega - direct.omega), 10 * tol * std::abs(p.omega));

      const auto back = cs::detail::geodesic_flow_lift(m, a, -s1, tol);
      EXPECT_LE(std::abs(back.theta - p.theta), 10 * tol);
      EXPECT_LE(std::abs(back.omega - p.omega), 10 * tol * std::abs(p.omega));

      const double lambda = 2.5;
      const auto scaled = cs::detail::geodesic_flow_lift(m, {p.theta, lambda * p.omega}, s1, tol);
      EXPECT_LE(std::abs(scaled.theta - a.theta), tol);
      EXPECT_LE(std::abs(scaled.omega - lambda * a.omega), tol * lambda * std::abs(a.omega));
    }
  }
}

TEST(Angles, ReductionAndDifference) {
  EXPECT_NEAR(cs::reduce_angle(-pi / 2), 1.5 * pi, 1e-15);
  EXPECT_NEAR(cs::reduce_angle(5 * pi), pi, 1e-14);
  EXPECT_NEAR(cs::angle_difference(0.1, 2 * pi - 0.1), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(cs::angle_difference(pi, 0.0), pi);
}
