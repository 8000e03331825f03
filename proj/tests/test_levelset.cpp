#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hamshape/levelset.hpp"

using namespace hamshape;
using namespace hamshape::testing;

namespace {

void expect_jet_matches_differences(const Primitive& p, Vec2 x) {
  const double e = 1e-5;
  const Jet2 j = primitive_jet(p, x);
  auto val = [&](Vec2 y) { return primitive_jet(p, y).value; };
  auto grad = [&](Vec2 y) { return primitive_jet(p, y).grad; };
  EXPECT_NEAR(j.grad.x, (val({x.x + e, x.y}) - val({x.x - e, x.y})) / (2 * e), 1e-8);
  EXPECT_NEAR(j.grad.y, (val({x.x, x.y + e}) - val({x.x, x.y - e})) / (2 * e), 1e-8);
  const Vec2 dx = (grad({x.x + e, x.y}) - grad({x.x - e, x.y})) * (0.5 / e);
  const Vec2 dy = (grad({x.x, x.y + e}) - grad({x.x, x.y - e})) * (0.5 / e);
  EXPECT_NEAR(j.hess.a11, dx.x, 1e-7);
  EXPECT_NEAR(j.hess.a21, dx.y, 1e-7);
  EXPECT_NEAR(j.hess.a12, dy.x, 1e-7);
  EXPECT_NEAR(j.hess.a22, dy.y, 1e-7);
}

}  // namespace

TEST(Primitives, JetsMatchCentralDifferences) {
  for (Vec2 x : {Vec2{0.3, -0.7}, Vec2{-1.2, 0.4}}) {
    expect_jet_matches_differences(Monomial{3, 1}, x);
    expect_jet_matches_differences(Monomial{0, 2}, x);
    expect_jet_matches_differences(Gaussian{{0.1, 0.2}, 0.6}, x);
    expect_jet_matches_differences(Ellipse{{0.2, -0.1}, 1.5, 0.7}, x);
  }
}

TEST(LevelFunction, PlusMergesBases) {
  const LevelFunction g = unit_circle();
  const LevelFunction h({Gaussian{{0, 0}, 1}, Monomial{0, 0}}, {2.0, 1.0});
  const LevelFunction s = g.plus(0.5, h);
  EXPECT_EQ(s.size(), 6u);
  const Vec2 x{0.4, -0.3};
  EXPECT_NEAR(s(x), g(x) + 0.5 * h(x), 1e-15);
  EXPECT_EQ(s.pins().size(), 1u);
}

TEST(Pins, ProjectionZeroesPinsWithMinimalChange) {
  const LevelFunction g({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}}, {1, 1, -0.8}, {{1, 0}, {0, 1}});
  const LevelFunction p = project_pinned(g);
  EXPECT_NEAR(p({1, 0}), 0.0, 1e-14);
  EXPECT_NEAR(p({0, 1}), 0.0, 1e-14);
  const LevelFunction already = unit_circle();
  EXPECT_EQ(project_pinned(already).coeffs(), already.coeffs());
}

TEST(Pins, RankDeficientConstraintsThrow) {
  const LevelFunction g({Monomial{0, 0}}, {1.0}, {{1, 0}, {0, 1}});
  EXPECT_THROW(project_pinned(g), RankDeficient);
}

TEST(ZeroSet, PointsLieOnTheCurve) {
  const Grid grid = square(33);
  const LevelFunction g = ellipse(1.3, 0.6);
  const auto pts = zero_set_points(g, grid);
  ASSERT_GT(pts.size(), 20u);
  for (const auto& p : pts) {
    EXPECT_TRUE(p.converged);
    EXPECT_LE(std::abs(g(p.point)), 1e-12);
  }
}

TEST(Admissibility, DetectsEachViolation) {
  const Grid grid = square(33);
  EXPECT_TRUE(check_admissible(unit_circle(), grid).admissible);

  const LevelFunction big({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}}, {1, 1, -9});
  const auto r1 = check_admissible(big, grid);
  EXPECT_FALSE(r1.admissible);
  EXPECT_FALSE(r1.positive_on_boundary);

  const LevelFunction cusp({Monomial{2, 0}, Monomial{0, 2}}, {1, 1});  // zero set is the critical point 0
  const auto r2 = check_admissible(cusp, grid);
  EXPECT_FALSE(r2.regular_zero_set);

  const LevelFunction pinned_out = unit_circle().with_pins({{1.5, 0}});
  const auto r3 = check_admissible(pinned_out, grid);
  EXPECT_FALSE(r3.pins_nonpositive);
  EXPECT_NE(r3.summary().find("pinned"), std::string::npos);
}

TEST(Census, DiskAnnulusAndDisjointPieces) {
  const Grid grid = square(65);
  const auto disk = extract_components(unit_circle(), grid, {0, 0});
  EXPECT_EQ(disk.size(), 1u);
  EXPECT_EQ(disk.holes, 0u);

  const auto ring = extract_components(annulus(), grid, {0.75, 0});
  ASSERT_EQ(ring.size(), 2u);
  EXPECT_EQ(ring.holes, 1u);
  EXPECT_EQ(ring.components[0].orientation, 1);
  EXPECT_EQ(ring.components[1].orientation, -1);
  EXPECT_NEAR(norm(ring.components[0].seed), 1.0, 1e-10);
  EXPECT_NEAR(norm(ring.components[1].seed), 0.5, 1e-10);

  // Two disjoint disks: only the one holding the anchor is kept.
  const LevelFunction two({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}, Monomial{4, 0}}, {-2, 1, 0.5, 1});
  const auto one = extract_components(two, grid, {1, 0});
  EXPECT_EQ(one.size(), 1u);
  EXPECT_GT(one.components[0].seed.x, 0.0);

  EXPECT_THROW(extract_components(unit_circle(), grid, {1.8, 1.8}), AnchorNotInClosure);
}

TEST(Census, PinnedSeedIsUsed) {
  const Grid grid = square(65);
  const auto c = extract_components(unit_circle(), grid, {0, 0}, unit_circle().pins());
  ASSERT_EQ(c.size(), 1u);
  EXPECT_TRUE(c.components[0].pinned);
  EXPECT_EQ(c.components[0].seed.x, 1.0);
  EXPECT_EQ(c.components[0].seed.y, 0.0);
}

TEST(Stability, SmallPerturbationsStayNearTheZeroSet) {
  const Grid grid = square(65);
  const LevelFunction g = annulus();
  const LevelFunction h({Gaussian{{0.4, 0.3}, 0.5}}, {1.0});
  for (double lam : {1e-3, -1e-3, 1e-2, -1e-2})
    for (const auto& p : zero_set_points(g.plus(lam, h), grid)) {
      const double d = std::min(std::abs(norm(p.point) - 0.5), std::abs(norm(p.point) - 1.0));
      EXPECT_LE(d, 10 * std::abs(lam));
    }
}
