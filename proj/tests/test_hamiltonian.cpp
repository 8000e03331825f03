#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "hamshape/hamiltonian.hpp"

using namespace hamshape;
using namespace hamshape::testing;

TEST(TraceOrbit, CirclePeriodAndConservation) {
  const LevelFunction g = unit_circle();
  const BoundaryTrace tr = trace_orbit(g, {1, 0}, TraceOptions{}, 4.0);
  EXPECT_NEAR(tr.period, kPi, 1e-10);
  EXPECT_TRUE(tr.intervals() % 2 == 0);
  for (const Vec2& z : tr.z) EXPECT_NEAR(g(z), 0.0, 1e-10);
  EXPECT_NEAR(norm(tr.z.back() - tr.z.front()), 0.0, 1e-10);
  EXPECT_GT(tr.signed_area(), 0.0);
}

TEST(TraceOrbit, EllipsePeriodMatchesClosedForm) {
  // g = (x/a)^2 + (y/b)^2 - 1 has period pi a b.
  const double a = 1.4, b = 0.6;
  const BoundaryTrace tr = trace_orbit(ellipse(a, b), {a, 0}, TraceOptions{}, 4.0);
  EXPECT_NEAR(tr.period, kPi * a * b, 1e-9);
}

TEST(TraceOrbit, SimpsonWeightsSumToThePeriod) {
  const BoundaryTrace tr = trace_orbit(ellipse(1.2, 0.8), {1.2, 0}, TraceOptions{}, 4.0);
  double s = 0.0;
  for (int i = 0; i <= tr.intervals(); ++i) s += tr.weight(i);
  EXPECT_NEAR(s, tr.period, 1e-13 * tr.period);
}

TEST(TraceOrbit, OpenOrbitIsRejected) {
  // g = x - 0.5 has straight-line orbits leaving the domain.
  const LevelFunction g({Monomial{1, 0}, Monomial{0, 0}}, {1, -0.5});
  TraceOptions opt;
  opt.arc_budget = 5.0;
  EXPECT_THROW(trace_orbit(g, {0.5, 0}, opt, 4.0), Error);
}

TEST(TraceCsv, RoundTripIsBitExact) {
  const BoundaryTrace tr = trace_orbit(ellipse(1.1, 0.7), {1.1, 0}, TraceOptions{}, 4.0);
  std::stringstream ss;
  write_trace_csv(ss, tr);
  const BoundaryTrace back = read_trace_csv(ss);
  EXPECT_EQ(back.period, tr.period);
  ASSERT_EQ(back.z.size(), tr.z.size());
  for (std::size_t i = 0; i < tr.z.size(); ++i) {
    EXPECT_EQ(back.times[i], tr.times[i]);
    EXPECT_EQ(back.z[i].x, tr.z[i].x);
    EXPECT_EQ(back.zp[i].y, tr.zp[i].y);
  }
}

TEST(Variations, PeriodDerivativeOfScaledCircle) {
  // g + lambda h with h = x^2 + y^2 has period pi / (1 + lambda): theta = -pi.
  const LevelFunction g = unit_circle(false);
  const LevelFunction h({Monomial{2, 0}, Monomial{0, 2}}, {1, 1});
  const BoundaryTrace tr = trace_orbit(g, {1, 0}, TraceOptions{}, 4.0);
  const auto var = solve_variations(g, h, tr);
  EXPECT_NEAR(var.theta, -kPi, 1e-9);
}

TEST(Variations, SlidingSeedFollowsTheNewtonProjection) {
  const LevelFunction g = unit_circle(false);
  const LevelFunction h({Monomial{0, 0}}, {1.0});
  BoundaryTrace tr = trace_orbit(g, {1, 0}, TraceOptions{}, 4.0);
  const auto var = solve_variations(g, h, tr);
  // The zero set of x^2 + y^2 - 1 + lambda is the circle of radius sqrt(1 - lambda).
  EXPECT_NEAR(var.w0.x, -0.5, 1e-14);
  EXPECT_NEAR(var.w0.y, 0.0, 1e-14);
}
