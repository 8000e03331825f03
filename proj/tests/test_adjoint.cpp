#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hamshape/adjoint.hpp"

using namespace hamshape;
using namespace hamshape::testing;

TEST(Multiplier, LeastSquaresFit) {
  const auto fit = estimate_multiplier({2, -4, 1}, {-1, 2, -0.5});
  EXPECT_TRUE(fit.reliable);
  EXPECT_DOUBLE_EQ(fit.k, 2.0);
  EXPECT_NEAR(fit.residual_norm, 0.0, 1e-15);
  EXPECT_FALSE(estimate_multiplier({1, 2}, {0, 0}).reliable);
}

TEST(Adjoint, ResidualEqualsTheDirectDerivative) {
  const Grid grid = square(33);
  for (const EvalContext& ctx : {circle_context(grid), circle_context(grid, false), annulus_context(grid)}) {
    const CostIntegrand j = CostIntegrand::tracking_constant(0.2);
    const Sensitivity sens(ctx, j);
    for (double k : {0.0, 3.0}) {
      const AdjointBundle b = assemble_adjoint(sens, k);
      const LevelFunction h = bump_direction();
      const ScalarField v = bump_field(grid);
      const auto d = sens.derivative(h, v);
      const double r = optimality_residual(ctx, b, h, v);
      EXPECT_NEAR(r, d.dJ + k * d.dS, 1e-11 * (1 + std::abs(d.dJ) + std::abs(k * d.dS)));
    }
  }
}

TEST(Adjoint, ControlGradientMatchesTheResidualInV) {
  const Grid grid = square(33);
  const EvalContext ctx = circle_context(grid);
  const CostIntegrand j = CostIntegrand::tracking_constant(0.2);
  const Sensitivity sens(ctx, j);
  const AdjointBundle b = assemble_adjoint(sens, 1.5);
  const ScalarField v = bump_field(grid, {1.5, -1.0});
  const ScalarField gu = control_gradient(ctx.pair, b.p);
  const double lhs = optimality_residual(ctx, b, unit_circle().scaled(0.0), v);
  EXPECT_NEAR(lhs, l2_pairing(gu, v), 1e-12 * (1 + std::abs(lhs)));
}

TEST(Adjoint, ZeroProbesGiveAnEmptyReport) {
  const EvalContext ctx = circle_context(square(33));
  const auto rep = residual_report(ctx, CostIntegrand::perimeter(), {});
  EXPECT_TRUE(rep.probes.empty());
  EXPECT_EQ(rep.max_residual, 0.0);
}
