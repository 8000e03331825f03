#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hamshape/gradcheck.hpp"

using namespace hamshape;
using namespace hamshape::testing;

TEST(Functionals, PerimeterOfTheUnitCircle) {
  const EvalContext ctx = circle_context(square(33));
  EXPECT_NEAR(eval_cost(ctx, CostIntegrand::perimeter()), 2 * kPi, 1e-9);
}

TEST(Functionals, TrackingAConstantOnTheCircle) {
  const Grid grid = square(65);
  const LevelFunction g = unit_circle();
  const ScalarField f(grid, 0.0);
  const ControlPair pair = solve_state(g, ScalarField(grid), f);
  const EvalContext ctx = make_context(pair, extract_components(g, grid, {0, 0}, g.pins()));
  // y = 0 everywhere: J = c^2 * 2 pi and S = 0.
  EXPECT_NEAR(eval_cost(ctx, CostIntegrand::tracking_constant(0.5)), 0.25 * 2 * kPi, 1e-9);
  EXPECT_EQ(eval_constraint(ctx), 0.0);
}

TEST(Functionals, ManufacturedStateHasSmallNeumannDefect) {
  const TrackingProblem tp = disk_tracking(65);
  const auto mc = manufacture_control(tp.problem.grid(), tp.target, tp.state, RadialCutoff{{0, 0}, 1.0, 1.9},
                                      Consistency::discrete);
  const ControlPair pair = solve_state(tp.problem.op, tp.target, mc.u, tp.problem.f);
  const EvalContext ctx = make_context(pair, extract_components(tp.target, tp.problem.grid(), {0, 0}));
  EXPECT_LT(eval_constraint(ctx), 64 * kPi * std::pow(tp.problem.grid().hx(), 4));
  EXPECT_LT(eval_cost(ctx, tp.problem.cost), 1e-6);
}

TEST(Gradcheck, DerivativesPassOnCircleAndAnnulus) {
  const Grid grid = square(33);
  for (const EvalContext& ctx : {circle_context(grid), circle_context(grid, false), annulus_context(grid)}) {
    const auto checks = run_gradchecks(ctx, CostIntegrand::tracking_constant(0.2), bump_direction(),
                                       bump_field(grid), GradcheckOptions{});
    for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.name;
  }
}

TEST(Gradcheck, CorruptedConstraintDerivativeIsCaught) {
  const Grid grid = square(33);
  const EvalContext ctx = circle_context(grid);
  GradcheckOptions opt;
  opt.ds_override = corrupted_dS;
  const auto checks = run_gradchecks(ctx, CostIntegrand::perimeter(), bump_direction(), bump_field(grid), opt);
  bool ds_failed = false;
  for (const auto& c : checks)
    if (c.name == "dS") ds_failed = !c.pass;
  EXPECT_TRUE(ds_failed);
}

TEST(Gradcheck, ZeroDirectionIsDegenerate) {
  const Grid grid = square(33);
  const EvalContext ctx = circle_context(grid);
  const auto checks = run_gradchecks(ctx, CostIntegrand::perimeter(), unit_circle().scaled(0.0), ScalarField(grid),
                                     GradcheckOptions{});
  for (const auto& c : checks) {
    EXPECT_TRUE(c.degenerate) << c.name;
    EXPECT_EQ(c.analytic, 0.0);
  }
}

TEST(Sensitivity, ConstraintQualificationVanishesAtFeasibility) {
  const Grid grid = square(33);
  const LevelFunction g = unit_circle();
  const ControlPair pair = solve_state(g, ScalarField(grid), ScalarField(grid, 0.0));
  const EvalContext ctx = make_context(pair, extract_components(g, grid, {0, 0}, g.pins()));
  EXPECT_EQ(constraint_qualification(ctx), 0.0);
}
