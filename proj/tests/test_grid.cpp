#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/random.hpp"

using namespace hamshape;
using namespace hamshape::testing;

TEST(Grid, IndexingAndGeometry) {
  const Grid g(-2, 2, -1, 1, 5, 3);
  EXPECT_DOUBLE_EQ(g.hx(), 1.0);
  EXPECT_DOUBLE_EQ(g.hy(), 1.0);
  EXPECT_EQ(g.size(), 15u);
  EXPECT_EQ(g.index(4, 2), 14u);
  EXPECT_EQ(g.node(1, 2).x, -1.0);
  EXPECT_EQ(g.node(1, 2).y, 1.0);
  EXPECT_TRUE(g.on_boundary(0, 1));
  EXPECT_FALSE(g.on_boundary(2, 1));
  EXPECT_THROW(Grid(0, 1, 0, 1, 2, 5), InvalidInput);
}

TEST(ScalarField, BicubicIsExactForQuadraticsAndThirdOrderForCubics) {
  auto q = [](Vec2 x) { return 1 + x.x - 2 * x.y + 0.5 * x.x * x.y - x.y * x.y; };
  const ScalarField fq = ScalarField::sample(square(17), q);
  for (Vec2 x : {Vec2{0.13, -0.41}, Vec2{-0.77, 0.9}, Vec2{1.1, 1.3}}) {
    const auto [v, gr] = fq.eval_with_gradient(x);
    EXPECT_NEAR(v, q(x), 1e-12);
    EXPECT_NEAR(gr.x, 1 + 0.5 * x.y, 1e-11);
    EXPECT_NEAR(gr.y, -2 + 0.5 * x.x - 2 * x.y, 1e-11);
  }
  auto c = [](Vec2 x) { return x.x * x.x * x.y - 0.5 * x.y * x.y * x.y; };
  std::vector<double> err;
  for (int n : {17, 33, 65}) {
    const ScalarField f = ScalarField::sample(square(n), c);
    double e = 0.0;
    for (Vec2 x : {Vec2{0.13, -0.41}, Vec2{-0.77, 0.9}, Vec2{1.1, 1.3}}) e = std::max(e, std::abs(f.eval(x) - c(x)));
    err.push_back(e);
  }
  EXPECT_GT(err[0] / err[1], 6.0);
  EXPECT_GT(err[1] / err[2], 6.0);
}

TEST(ScalarField, GradientInterpolantIsExactForQuadratics) {
  const Grid grid = square(33);
  const ScalarField f = ScalarField::sample(grid, [](Vec2 x) { return x.x * x.x + 3 * x.x * x.y - x.y; });
  const GradientInterpolant G(f);
  const auto s = G({0.31, -0.27});
  EXPECT_NEAR(s.value.x, 2 * 0.31 + 3 * -0.27, 1e-12);
  EXPECT_NEAR(s.value.y, 3 * 0.31 - 1, 1e-12);
  EXPECT_NEAR(s.jac.a11, 2.0, 1e-10);
  EXPECT_NEAR(s.jac.a12, 3.0, 1e-10);
  EXPECT_NEAR(s.jac.a22, 0.0, 1e-10);
}

TEST(DirichletOperator, SolveInvertsApplyOnInteriorNodes) {
  const Grid grid = square(33);
  const DirichletOperator op(grid);
  const ScalarField rhs = ScalarField::sample(grid, [](Vec2 x) { return std::cos(x.x) * (1 + x.y); });
  const ScalarField y = op.solve(rhs);
  const ScalarField back = op.apply(y);
  for (int j = 1; j < grid.ny - 1; ++j)
    for (int i = 1; i < grid.nx - 1; ++i) EXPECT_NEAR(back.at(i, j), rhs.at(i, j), 1e-10);
  for (int i = 0; i < grid.nx; ++i) EXPECT_EQ(y.at(i, 0), 0.0);
}

TEST(Transposition, PairingMatchesCurveFunctional) {
  const Grid grid = square(33);
  CurveSource src;
  for (int i = 0; i < 40; ++i) {
    const double a = 2 * kPi * i / 40;
    src.points.push_back({0.9 * std::cos(a), 0.7 * std::sin(a)});
    src.weights.push_back(0.1);
    src.value_density.push_back(std::sin(a));
    src.flux_density.push_back({std::cos(a), 0.3});
  }
  const std::vector<CurveSource> sources{src};
  const ScalarField p = solve_adjoint_transposition(grid, sources);
  const DirichletOperator op(grid);
  const CounterRng rng(3, 0);
  ScalarField mu(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) mu[k] = rng.uniform(k, -1, 1);
  EXPECT_NEAR(l2_pairing(p, mu), curve_functional(sources, op.solve(mu)), 1e-10);
}

TEST(FieldCsv, RoundTripIsBitExactWithIOuterOrdering) {
  const Grid grid(-1, 2, 0, 1, 4, 3);
  const ScalarField f = ScalarField::sample(grid, [](Vec2 x) { return std::exp(x.x) / 3.0 + x.y; });
  std::stringstream ss;
  write_field_csv(ss, f);
  std::string header, first, second;
  std::getline(ss, header);
  std::getline(ss, first);
  std::getline(ss, second);
  EXPECT_EQ(header.substr(0, 4), "4,3,");
  EXPECT_EQ(first.substr(0, 4), "0,0,");
  EXPECT_EQ(second.substr(0, 4), "0,1,");
  ss.seekg(0);
  const ScalarField g = read_field_csv(ss);
  ASSERT_TRUE(g.grid() == grid);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(g[k], f[k]);
}

TEST(FieldCsv, RejectsMalformedInput) {
  std::stringstream bad("3,3,0,1,0,1\n0,0,1\n");
  EXPECT_THROW(read_field_csv(bad), InvalidInput);
}
