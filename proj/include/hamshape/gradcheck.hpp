#pragma once

// Finite-difference oracles for the derivative formulas: one-sided
// difference quotients against the analytic derivatives (first order in
// lambda) and Taylor remainders under lambda halving (second order).

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamshape/functionals.hpp"
#include "hamshape/hamiltonian.hpp"
#include "hamshape/state_solver.hpp"

namespace hamshape {

struct FdCheck {
  std::string name;
  std::vector<double> lambdas;
  std::vector<double> errors;
  std::vector<double> ratios;  // errors[i] / errors[i + 1]
  double analytic = 0.0;       // scalar derivative, or max-norm of the field derivative
  bool degenerate = false;     // differences vanish or match to rounding: skipped
  bool pass = false;
};

struct GradcheckOptions {
  std::vector<double> lambdas{1e-3, 1e-4, 1e-5};
  double ratio_lo = 5.0, ratio_hi = 20.0;
  /// Replaces the dS assembly, so a corrupted formula can be fed through the checks.
  std::optional<DerivativeFn> ds_override;
};

namespace detail {

inline void grade(FdCheck& c, double scale, double lo, double hi) {
  double emax = 0.0;
  for (double e : c.errors) emax = std::max(emax, e);
  c.ratios.clear();
  for (std::size_t i = 0; i + 1 < c.errors.size(); ++i)
    c.ratios.push_back(c.errors[i + 1] > 0.0 ? c.errors[i] / c.errors[i + 1] : INFINITY);
  if (emax <= 1e-11 * (1.0 + scale)) {
    c.degenerate = true;
    c.pass = true;
    return;
  }
  c.pass = !c.ratios.empty();
  for (double r : c.ratios) c.pass = c.pass && r >= lo && r <= hi;
}

/// Samples of the perturbed orbit at the base sample times, started from the
/// perturbed seed.
inline std::vector<Vec2> orbit_at_base_times(const LevelFunction& g, const BoundaryTrace& base) {
  const Vec2 seed = base.pinned ? base.seed : newton_project(g, base.seed).point;
  return sample_orbit(g, seed, base.step(), base.substeps, base.intervals());
}

inline FdCheck named(const char* name) {
  FdCheck c;
  c.name = name;
  return c;
}

}  // namespace detail

/// Difference-quotient checks in direction (h, v) at ctx: system in
/// variations, state variation, period derivative, dS and dJ.
inline std::vector<FdCheck> run_gradchecks(const EvalContext& ctx, const CostIntegrand& j,
                                           const LevelFunction& h, const ScalarField& v,
                                           const GradcheckOptions& opt = {}) {
  const auto& g = ctx.pair.g;
  const Sensitivity sens(ctx, j);
  const auto d = sens.derivative(h, v);
  const double dS_an = opt.ds_override ? (*opt.ds_override)(ctx, h, v) : d.dS;
  const double J0 = eval_cost(ctx, j), S0 = eval_constraint(ctx);

  std::vector<VariationSolution> vars;
  for (const auto& tr : ctx.traces) vars.push_back(solve_variations(g, h, tr));
  const ScalarField q = solve_state_variation(ctx.pair, h, v);

  FdCheck cz = detail::named("variations"), cy = detail::named("pde_variation"),
          ct = detail::named("period"), cs = detail::named("dS"), cj = detail::named("dJ");
  for (const auto& var : vars)
    for (const Vec2& w : var.w) cz.analytic = std::max(cz.analytic, norm(w));
  cy.analytic = q.max_abs();
  for (const auto& var : vars) ct.analytic = std::max(ct.analytic, std::abs(var.theta));
  cs.analytic = dS_an;
  cj.analytic = d.dJ;

  for (double lam : opt.lambdas) {
    const LevelFunction gl = g.plus(lam, h);
    ScalarField ul = ctx.pair.u;
    ul.axpy(lam, v);
    const EvalContext cl = perturbed_context(ctx, gl, ul);

    double ez = 0.0, et = 0.0;
    for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
      const auto& tr = ctx.traces[c];
      const auto zl = detail::orbit_at_base_times(gl, tr);
      for (std::size_t i = 0; i < tr.z.size(); ++i)
        ez = std::max(ez, norm((zl[i] - tr.z[i]) * (1.0 / lam) - vars[c].w[i]));
      et = std::max(et, std::abs((cl.traces[c].period - tr.period) / lam - vars[c].theta));
    }
    double ey = 0.0;
    for (std::size_t k = 0; k < q.values().size(); ++k)
      ey = std::max(ey, std::abs((cl.pair.y[k] - ctx.pair.y[k]) / lam - q[k]));

    for (FdCheck* c : {&cz, &cy, &ct, &cs, &cj}) c->lambdas.push_back(lam);
    cz.errors.push_back(ez);
    cy.errors.push_back(ey);
    ct.errors.push_back(et);
    cs.errors.push_back(std::abs((eval_constraint(cl) - S0) / lam - dS_an));
    cj.errors.push_back(std::abs((eval_cost(cl, j) - J0) / lam - d.dJ));
  }
  std::vector<FdCheck> out{cz, cy, ct, cs, cj};
  for (auto& c : out) detail::grade(c, std::abs(c.analytic), opt.ratio_lo, opt.ratio_hi);
  return out;
}

struct RemainderOptions {
  double lambda0 = 1e-2;
  int levels = 4;
  double ratio_lo = 3.5, ratio_hi = 4.5;
};

/// Taylor remainders |F(g + lambda h, u + lambda v) - F - lambda F'| for the
/// orbit samples, the state, the periods, J and S, over halving lambda.
inline std::vector<FdCheck> run_remainder_checks(const EvalContext& ctx, const CostIntegrand& j,
                                                 const LevelFunction& h, const ScalarField& v,
                                                 const RemainderOptions& opt = {}) {
  const auto& g = ctx.pair.g;
  const Sensitivity sens(ctx, j);
  const auto d = sens.derivative(h, v);
  const double J0 = eval_cost(ctx, j), S0 = eval_constraint(ctx);
  std::vector<VariationSolution> vars;
  for (const auto& tr : ctx.traces) vars.push_back(solve_variations(g, h, tr));
  const ScalarField q = solve_state_variation(ctx.pair, h, v);

  FdCheck cz = detail::named("orbit"), cy = detail::named("state"), ct = detail::named("period"),
          cj = detail::named("J"), cs = detail::named("S");
  double lam = opt.lambda0;
  for (int l = 0; l < opt.levels; ++l, lam *= 0.5) {
    const LevelFunction gl = g.plus(lam, h);
    ScalarField ul = ctx.pair.u;
    ul.axpy(lam, v);
    const EvalContext cl = perturbed_context(ctx, gl, ul);
    double rz = 0.0, rt = 0.0;
    for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
      const auto& tr = ctx.traces[c];
      const auto zl = detail::orbit_at_base_times(gl, tr);
      for (std::size_t i = 0; i < tr.z.size(); ++i)
        rz = std::max(rz, norm(zl[i] - tr.z[i] - vars[c].w[i] * lam));
      rt = std::max(rt, std::abs(cl.traces[c].period - tr.period - lam * vars[c].theta));
    }
    double ry = 0.0;
    for (std::size_t k = 0; k < q.values().size(); ++k)
      ry = std::max(ry, std::abs(cl.pair.y[k] - ctx.pair.y[k] - lam * q[k]));
    for (FdCheck* c : {&cz, &cy, &ct, &cj, &cs}) c->lambdas.push_back(lam);
    cz.errors.push_back(rz);
    cy.errors.push_back(ry);
    ct.errors.push_back(rt);
    cj.errors.push_back(std::abs(eval_cost(cl, j) - J0 - lam * d.dJ));
    cs.errors.push_back(std::abs(eval_constraint(cl) - S0 - lam * d.dS));
  }
  std::vector<FdCheck> out{cz, cy, ct, cj, cs};
  for (auto& c : out) detail::grade(c, 0.0, opt.ratio_lo, opt.ratio_hi);
  return out;
}

/// A dS assembly with the sign of the direct grad-h term flipped: a mutation
/// the difference-quotient check must reject.
inline double corrupted_dS(const EvalContext& ctx, const LevelFunction& h, const ScalarField& v) {
  static const CostIntegrand none = CostIntegrand::perimeter();
  const Sensitivity sens(ctx, none);
  double out = sens.derivative(h, v).dS;
  if (h.is_zero()) return out;
  for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
    const auto& tr = ctx.traces[c];
    for (int i = 0; i <= tr.intervals(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      out -= 2.0 * tr.weight(i) * dot(sens.terms()[c].samples[k].hS, h.gradient(tr.z[k]));
    }
  }
  return out;
}

}  // namespace hamshape
