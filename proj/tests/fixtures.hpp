#pragma once

#include <cmath>
#include <memory>
#include <numbers>

#include "hamshape/optimizer.hpp"

namespace hamshape::testing {

inline constexpr double kPi = std::numbers::pi;

inline Grid square(int n, double half = 2.0) { return Grid(-half, half, -half, half, n, n); }

/// x^2 + y^2 - 1 over the quadratic basis {x^2, y^2, 1, x, y}, pinned at (1, 0).
inline LevelFunction unit_circle(bool pinned = true) {
  LevelFunction g({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}, Monomial{1, 0}, Monomial{0, 1}},
                  {1, 1, -1, 0, 0});
  return pinned ? g.with_pins({{1, 0}}) : g;
}

/// (x / a)^2 + (y / b)^2 - 1.
inline LevelFunction ellipse(double a, double b) {
  return LevelFunction({Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}}, {1 / (a * a), 1 / (b * b), -1});
}

/// (r^2 - r0^2)(r^2 - r1^2): negative on the annulus r0 < r < r1.
inline LevelFunction annulus(double r0 = 0.5, double r1 = 1.0) {
  const double a = r0 * r0, b = r1 * r1;
  return LevelFunction({Monomial{4, 0}, Monomial{2, 2}, Monomial{0, 4}, Monomial{2, 0}, Monomial{0, 2}, Monomial{0, 0}},
                       {1, 2, 1, -(a + b), -(a + b), a * b});
}

/// A smooth direction vanishing at the pin (1, 0) of unit_circle().
inline LevelFunction bump_direction() {
  return project_pinned(LevelFunction({Gaussian{{0.3, 0.5}, 0.6}, Monomial{0, 0}}, {1, 0}, {{1, 0}}));
}

inline ScalarField bump_field(const Grid& grid, Vec2 c = {1.2, 0.0}) {
  return ScalarField::sample(grid, [c](Vec2 p) { return std::exp(-dot(p - c, p - c)); });
}

/// Circle context with f = 1 and a smooth nonzero control.
inline EvalContext circle_context(const Grid& grid, bool pinned = true) {
  const LevelFunction g = unit_circle(pinned);
  const ScalarField f(grid, 1.0);
  const ScalarField u = ScalarField::sample(grid, [](Vec2 p) { return 0.3 * std::sin(p.x) + 0.2 * p.y; });
  auto op = std::make_shared<const DirichletOperator>(grid);
  return make_context(solve_state(op, g, u, f), extract_components(g, grid, {0, 0}, g.pins()));
}

/// Annulus context with f = 1 and a smooth nonzero control; both curves carry cost.
inline EvalContext annulus_context(const Grid& grid) {
  const LevelFunction g = annulus();
  const ScalarField f(grid, 1.0);
  const ScalarField u = ScalarField::sample(grid, [](Vec2 p) { return 0.5 + 0.2 * p.x * p.y; });
  auto op = std::make_shared<const DirichletOperator>(grid);
  return make_context(solve_state(op, g, u, f), extract_components(g, grid, {0.75, 0}), {}, {0, 1});
}

/// Tracking problem whose data are manufactured from the disk of radius 0.8:
/// y_d(x) = (|x|^2 - 0.64)^2 + 1 and f from the same closed form.
struct TrackingProblem {
  Problem problem;
  LevelFunction target;
  LevelFunction start;
  RadialState state;
};

inline RadialState disk_state() { return RadialState{{0, 0}, 0.8, 1.0, 1.0, 2}; }

inline TrackingProblem disk_tracking(int n = 65) {
  TrackingProblem tp;
  const Grid grid = square(n);
  tp.state = disk_state();
  tp.target = LevelFunction({Ellipse{{0, 0}, 1, 1}, Monomial{0, 0}, Monomial{1, 0}, Monomial{0, 1}}, {1, 0.36, 0, 0});
  tp.start = tp.target.with_coeffs({1, -0.44, 0, 0});
  const auto mc = manufacture_control(grid, tp.target, tp.state, RadialCutoff{{0, 0}, 1.0, 1.9}, Consistency::discrete);
  tp.problem.op = std::make_shared<const DirichletOperator>(grid);
  tp.problem.f = mc.f;
  tp.problem.cost = CostIntegrand::tracking(tp.state);
  tp.problem.anchor = {0, 0};
  tp.problem.free_terms = {0, 1, 1, 1};
  return tp;
}

/// Same data, started from the annulus 0.3 < r < 1.2 with a quartic basis
/// whose radial coefficients are free.
inline TrackingProblem annulus_tracking(int n = 65) {
  TrackingProblem tp;
  const Grid grid = square(n);
  tp.state = disk_state();
  const double a = 0.09, b = 1.44;
  tp.start = LevelFunction({Monomial{4, 0}, Monomial{2, 2}, Monomial{0, 4}, Ellipse{{0, 0}, 1, 1}, Monomial{0, 0}},
                           {1, 2, 1, -(a + b), a * b - (a + b)});
  tp.target = tp.start.with_coeffs({1, 2, 1, 0.36, -0.28});
  const auto mc = manufacture_control(grid, tp.target, tp.state, RadialCutoff{{0, 0}, 1.0, 1.9}, Consistency::discrete);
  tp.problem.op = std::make_shared<const DirichletOperator>(grid);
  tp.problem.f = mc.f;
  tp.problem.cost = CostIntegrand::tracking(tp.state);
  tp.problem.anchor = {0.6, 0};
  tp.problem.free_terms = {0, 0, 0, 1, 1};
  return tp;
}

/// Least-squares slope of log(err) against log(h).
inline double log_slope(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hamshape::testing
