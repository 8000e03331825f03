#pragma once

// The state map y = A(f + g_+^2 u) on the hold-all grid, its variation, and
// manufactured controls whose state solves a Neumann problem inside {g < 0}.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "hamshape/core.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/levelset.hpp"

namespace hamshape {

/// g_+ = max(g, 0) sampled at the grid nodes.
inline ScalarField positive_part(const LevelFunction& g, const Grid& grid) {
  return ScalarField::sample(grid, [&](Vec2 p) { return std::max(g(p), 0.0); });
}

struct ControlPair {
  LevelFunction g;
  ScalarField u;
  ScalarField f;
  ScalarField g_plus;
  ScalarField y;
  GradientInterpolant grad_y;
  std::shared_ptr<const DirichletOperator> op;

  const Grid& grid() const { return y.grid(); }
};

inline ControlPair solve_state(std::shared_ptr<const DirichletOperator> op, const LevelFunction& g,
                               const ScalarField& u, const ScalarField& f) {
  const Grid& grid = op->grid();
  if (!(u.grid() == grid) || !(f.grid() == grid)) throw InvalidInput("control and source grids differ");
  ControlPair pair;
  pair.g = g;
  pair.u = u;
  pair.f = f;
  pair.g_plus = positive_part(g, grid);
  ScalarField rhs = f;
  for (std::size_t k = 0; k < grid.size(); ++k) rhs[k] += pair.g_plus[k] * pair.g_plus[k] * u[k];
  pair.y = op->solve(rhs);
  pair.grad_y = GradientInterpolant(pair.y);
  pair.op = std::move(op);
  return pair;
}

inline ControlPair solve_state(const LevelFunction& g, const ScalarField& u, const ScalarField& f) {
  return solve_state(std::make_shared<const DirichletOperator>(u.grid()), g, u, f);
}

/// Source of the state variation: g_+^2 v + 2 g_+ u h at the nodes.
inline ScalarField variation_source(const ControlPair& pair, const LevelFunction& h,
                                    const ScalarField& v) {
  const Grid& grid = pair.grid();
  ScalarField mu(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t k = grid.index(i, j);
      const double gp = pair.g_plus[k];
      if (gp == 0.0) continue;
      mu[k] = gp * gp * v[k] + 2.0 * gp * pair.u[k] * h(grid.node(i, j));
    }
  return mu;
}

inline ScalarField solve_state_variation(const ControlPair& pair, const LevelFunction& h,
                                         const ScalarField& v) {
  return pair.op->solve(variation_source(pair, h, v));
}

// ---------------------------------------------------------------------------
// Manufactured Neumann states.

/// y(x) = amplitude * (|x - c|^2 - r^2)^power + shift. For power >= 2 the
/// gradient vanishes on the circle |x - c| = r.
struct RadialState {
  Vec2 center;
  double radius = 1.0;
  double shift = 0.0;
  double amplitude = 1.0;
  int power = 2;

  double phi(double s, int d) const {
    const double t = s - radius * radius;
    double coef = amplitude;
    for (int k = 0; k < d; ++k) coef *= (power - k);
    if (power - d < 0) return 0.0;
    return coef * std::pow(t, power - d) + (d == 0 ? shift : 0.0);
  }
  double value(Vec2 x) const {
    const Vec2 d = x - center;
    return phi(dot(d, d), 0);
  }
  Vec2 gradient(Vec2 x) const {
    const Vec2 d = x - center;
    return d * (2.0 * phi(dot(d, d), 1));
  }
  double laplacian(Vec2 x) const {
    const Vec2 d = x - center;
    const double s = dot(d, d);
    return 4.0 * s * phi(s, 2) + 4.0 * phi(s, 1);
  }
};

/// Smooth radial cutoff: 1 for |x - c| <= r_inner, 0 for |x - c| >= r_outer,
/// a C3 septic smoothstep in between.
struct RadialCutoff {
  Vec2 center;
  double r_inner = 1.2;
  double r_outer = 1.9;

  // Value and first two radial derivatives.
  std::array<double, 3> radial(double rho) const {
    if (rho <= r_inner) return {1.0, 0.0, 0.0};
    if (rho >= r_outer) return {0.0, 0.0, 0.0};
    const double w = r_outer - r_inner, t = (rho - r_inner) / w;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    const double s = t4 * (35 - 84 * t + 70 * t2 - 20 * t3);
    const double ds = 140 * t3 * (1 - t) * (1 - t) * (1 - t);
    const double dds = 420 * t2 * (1 - t) * (1 - t) * (1 - 2 * t);
    return {1.0 - s, -ds / w, -dds / (w * w)};
  }
  double value(Vec2 x) const { return radial(norm(x - center))[0]; }
};

enum class Consistency { analytic, discrete };

struct ManufacturedControl {
  ScalarField u;
  ScalarField f;
  ScalarField y_extended;  // y * cutoff at the nodes
  double boundary_value = 0.0;  // y on its own Neumann circle
  double max_neumann_defect = 0.0;  // max |grad y . grad g| over zero-set samples
};

/// Control u and source f such that the state of (g, u) reproduces the
/// manufactured y inside {g < 0}. With `analytic` consistency f and the
/// Laplacian of y * cutoff are closed-form; with `discrete` they use the
/// grid's 5-point Laplacian, so the discrete state equals y * cutoff at the
/// nodes up to solver tolerance.
inline ManufacturedControl manufacture_control(const Grid& grid, const LevelFunction& g,
                                               const RadialState& y, const RadialCutoff& chi,
                                               Consistency mode = Consistency::analytic,
                                               double delta_u = 1e-3) {
  ManufacturedControl out;
  for (const auto& p : zero_set_points(g, grid))
    out.max_neumann_defect =
        std::max(out.max_neumann_defect, std::abs(dot(y.gradient(p.point), g.gradient(p.point))));
  if (out.max_neumann_defect > 1e-8)
    throw NeumannIncompatible("manufactured state violates the Neumann condition on {g = 0}");
  out.boundary_value = y.shift;

  out.y_extended = ScalarField::sample(grid, [&](Vec2 x) { return y.value(x) * chi.value(x); });
  ScalarField y_plain = ScalarField::sample(grid, [&](Vec2 x) { return y.value(x); });
  ScalarField target(grid);  // -lap(y chi) + y chi
  if (mode == Consistency::analytic) {
    out.f = ScalarField::sample(grid, [&](Vec2 x) { return -y.laplacian(x) + y.value(x); });
    target = ScalarField::sample(grid, [&](Vec2 x) {
      const Vec2 d = x - chi.center;
      const double rho = norm(d);
      const auto c = chi.radial(rho);
      const double lap_chi = rho > 0.0 ? c[2] + c[1] / rho : 0.0;
      const Vec2 grad_chi = rho > 0.0 ? d * (c[1] / rho) : Vec2{};
      const double lap =
          y.laplacian(x) * c[0] + 2.0 * dot(y.gradient(x), grad_chi) + y.value(x) * lap_chi;
      return -lap + y.value(x) * c[0];
    });
  } else {
    const DirichletOperator op(grid);
    out.f = op.apply(y_plain);
    target = op.apply(out.y_extended);
    // apply() leaves boundary rows at zero; those nodes never enter the solve.
  }
  out.u = ScalarField(grid);
  for (int j = 1; j < grid.ny - 1; ++j)
    for (int i = 1; i < grid.nx - 1; ++i) {
      const double gv = g(grid.node(i, j));
      if (gv <= delta_u) continue;
      const std::size_t k = grid.index(i, j);
      out.u[k] = (target[k] - out.f[k]) / (gv * gv);
    }
  return out;
}

}  // namespace hamshape
