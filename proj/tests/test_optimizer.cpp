#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "hamshape/random.hpp"

using namespace hamshape;
using namespace hamshape::testing;

TEST(Random, SplitMixReferenceValue) {
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
  const CounterRng a(5, 2), b(5, 2), c(5, 3);
  EXPECT_EQ(a.uniform(17), b.uniform(17));
  EXPECT_NE(a.uniform(17), c.uniform(17));
  for (std::uint64_t i = 0; i < 100; ++i) {
    const double u = a.uniform(i, -1, 1);
    EXPECT_GE(u, -1.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(MultiplierUpdate, ArithmeticAndPenaltyGrowth) {
  OptState st;
  st.k = 1.0;
  st.rho = 10.0;
  st.eval.S = 0.01;
  double S_prev = 1.0;
  multiplier_update(st, S_prev);
  EXPECT_DOUBLE_EQ(st.k, 1.1);
  EXPECT_DOUBLE_EQ(st.rho, 10.0);
  EXPECT_EQ(S_prev, 0.01);

  st.eval.S = 0.009;  // not a fourfold decrease
  multiplier_update(st, S_prev);
  EXPECT_DOUBLE_EQ(st.rho, 100.0);

  st.eval.S = 0.0;
  const double k = st.k;
  multiplier_update(st, S_prev);
  EXPECT_EQ(st.k, k);

  st.rho = 5e7;
  st.eval.S = 1.0;
  multiplier_update(st, S_prev);
  EXPECT_EQ(st.rho, 1e8);
}

TEST(Probes, DeterministicAndPinned) {
  const TrackingProblem tp = disk_tracking(33);
  Problem pb = tp.problem;
  const LevelFunction g = unit_circle();
  pb.free_terms.clear();
  const auto a = make_probes(pb, g, 4, 11), b = make_probes(pb, g, 4, 11);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].h.coeffs(), b[i].h.coeffs());
    EXPECT_NEAR(a[i].h({1, 0}), 0.0, 1e-13);
    EXPECT_EQ(a[i].v[100], b[i].v[100]);
  }
  EXPECT_TRUE(make_probes(pb, g, 0, 11).empty());
}

TEST(Optimizer, StepsDecreaseTheLagrangianAndKeepPins) {
  const Grid grid = square(33);
  Problem pb;
  pb.op = std::make_shared<const DirichletOperator>(grid);
  pb.f = ScalarField(grid, 1.0);
  pb.cost = CostIntegrand::tracking_constant(0.1);
  const LevelFunction g0 = unit_circle();
  OptimizeOptions opt;
  opt.max_iter = 5;
  OptState st = initial_state(pb, g0, ScalarField(grid), opt);
  st = optimize(pb, std::move(st), opt);
  ASSERT_GE(st.history.size(), 2u);
  EXPECT_EQ(st.history.front().event, "initial");
  double L = st.history.front().L;
  for (const auto& h : st.history)
    if (h.event == "step" || h.event == "topology_change") {
      EXPECT_LE(h.L, L);
      L = h.L;
    }
  EXPECT_NEAR(st.g({1, 0}), 0.0, 1e-12);
  EXPECT_FALSE(st.stop_reason.empty());
}

TEST(Optimizer, ZeroIterationsOnlyRecordTheStart) {
  const TrackingProblem tp = disk_tracking(33);
  OptimizeOptions opt;
  opt.max_iter = 0;
  OptState st = initial_state(tp.problem, tp.start, ScalarField(tp.problem.grid()), opt);
  const double J0 = st.eval.J;
  st = optimize(tp.problem, std::move(st), opt);
  EXPECT_EQ(st.iter, 0);
  EXPECT_EQ(st.eval.J, J0);
  std::stringstream ss;
  write_history_jsonl(ss, st.history);
  EXPECT_NE(ss.str().find("\"event\":\"initial\""), std::string::npos);
}

TEST(Optimizer, InadmissibleStartIsRejected) {
  const Grid grid = square(33);
  Problem pb;
  pb.op = std::make_shared<const DirichletOperator>(grid);
  pb.f = ScalarField(grid, 1.0);
  const LevelFunction big({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}}, {1, 1, -9});
  EXPECT_THROW(initial_state(pb, big, ScalarField(grid), OptimizeOptions{}), InvalidInput);
}
