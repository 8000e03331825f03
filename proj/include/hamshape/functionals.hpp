#pragma once

// Boundary functionals along the traced orbits: the cost J, the Neumann
// constraint S, and their directional derivatives in (h, v).
//
// All integrals are composite Simpson sums over the trace samples. The
// derivatives are exact derivatives of those sums: the samples move with the
// variation w, the sample times scale with the period, and the seed of an
// unpinned curve slides along the normal.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hamshape/core.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/hamiltonian.hpp"
#include "hamshape/levelset.hpp"
#include "hamshape/state_solver.hpp"

namespace hamshape {

/// j(sigma, y) with its partial gradient in sigma and derivative in y.
struct CostValue {
  double j = 0.0;
  Vec2 d_sigma;
  double d_y = 0.0;
};

class CostIntegrand {
 public:
  using Fn = std::function<CostValue(Vec2, double)>;

  CostIntegrand(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  /// (y - y_d(sigma))^2 for a closed-form target with gradient.
  static CostIntegrand tracking(std::function<double(Vec2)> yd, std::function<Vec2(Vec2)> grad_yd) {
    return CostIntegrand("tracking", [yd = std::move(yd), gd = std::move(grad_yd)](Vec2 s, double y) {
      const double r = y - yd(s);
      return CostValue{r * r, gd(s) * (-2.0 * r), 2.0 * r};
    });
  }
  static CostIntegrand tracking(const RadialState& target) {
    return tracking([target](Vec2 s) { return target.value(s); },
                    [target](Vec2 s) { return target.gradient(s); });
  }
  static CostIntegrand tracking_constant(double c) {
    return tracking([c](Vec2) { return c; }, [](Vec2) { return Vec2{}; });
  }
  static CostIntegrand perimeter() {
    return CostIntegrand("perimeter", [](Vec2, double) { return CostValue{1.0, {}, 0.0}; });
  }

  CostValue operator()(Vec2 sigma, double y) const { return fn_(sigma, y); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

/// Everything the boundary functionals need at one point (g, u).
struct EvalContext {
  ControlPair pair;
  ComponentCensus census;
  std::vector<BoundaryTrace> traces;
  std::vector<int> cost_components{0};
  TraceOptions trace_options;

  bool is_cost(int c) const {
    for (int k : cost_components)
      if (k == c) return true;
    return false;
  }
  const Grid& grid() const { return pair.grid(); }
};

inline EvalContext make_context(ControlPair pair, ComponentCensus census,
                                const TraceOptions& opt = {}, std::vector<int> cost_components = {0}) {
  EvalContext ctx;
  ctx.traces = trace_components(pair.g, census, opt, pair.grid().diameter());
  ctx.pair = std::move(pair);
  ctx.census = std::move(census);
  ctx.cost_components = std::move(cost_components);
  ctx.trace_options = opt;
  return ctx;
}

/// Context for a perturbed point that keeps the census seeds, sample counts
/// and step subdivisions of `base`.
inline EvalContext perturbed_context(const EvalContext& base, const LevelFunction& g,
                                     const ScalarField& u) {
  EvalContext ctx;
  ctx.pair = solve_state(base.pair.op, g, u, base.pair.f);
  ctx.census = base.census;
  ctx.cost_components = base.cost_components;
  ctx.trace_options = base.trace_options;
  for (const auto& tr : base.traces)
    ctx.traces.push_back(retrace(g, tr, base.trace_options, base.grid().diameter()));
  for (std::size_t c = 0; c < ctx.traces.size(); ++c) ctx.census.components[c].seed = ctx.traces[c].seed;
  return ctx;
}

// ---------------------------------------------------------------------------
// Pointwise integrands and their linearizations.

/// Local data at one trace sample. Parts tagged J belong to the cost
/// integrand j |z'| (zero off cost components); parts tagged S to (Y . grad g)^2.
struct SampleTerms {
  double FJ = 0.0, FS = 0.0;
  Vec2 aJ, aS;            // gradients in the sample position
  Vec2 bJ;                // coefficient of b = (-d2 h, d1 h)
  Vec2 hS;                // coefficient of grad h
  double valueJ = 0.0;    // coefficient of q(z)
  Vec2 fluxS;             // coefficient of grad_h q(z)
};

inline SampleTerms sample_terms(const ControlPair& pair, const CostIntegrand* j, Vec2 z) {
  SampleTerms st;
  const Jet2 jg = pair.g.jet(z);
  const Vec2 zp = hamiltonian_velocity(jg);
  const Mat2 M = variation_matrix(jg);
  const GradientSample Y = pair.grad_y(z);
  const double flux = dot(Y.value, jg.grad);
  st.FS = flux * flux;
  st.aS = (Y.jac.transposed() * jg.grad + jg.hess * Y.value) * (2.0 * flux);
  st.hS = Y.value * (2.0 * flux);
  st.fluxS = jg.grad * (2.0 * flux);
  if (j) {
    const double speed = norm(zp);
    const auto [yv, gy] = pair.y.eval_with_gradient(z);
    const CostValue cv = (*j)(z, yv);
    st.FJ = cv.j * speed;
    st.aJ = (cv.d_sigma + gy * cv.d_y) * speed + M.transposed() * zp * (cv.j / speed);
    st.bJ = zp * (cv.j / speed);
    st.valueJ = cv.d_y * speed;
  }
  return st;
}

/// Per-component sums and sample terms, cached for repeated derivative evaluations.
struct ComponentTerms {
  std::vector<SampleTerms> samples;
  double J = 0.0, S = 0.0;
  // Coefficients of the period derivative theta in dJ and dS.
  double thetaJ = 0.0, thetaS = 0.0;
};

inline ComponentTerms component_terms(const EvalContext& ctx, const CostIntegrand* j, int c) {
  const BoundaryTrace& tr = ctx.traces[static_cast<std::size_t>(c)];
  const CostIntegrand* jc = ctx.is_cost(c) ? j : nullptr;
  ComponentTerms out;
  const int n = tr.intervals();
  out.samples.reserve(tr.z.size());
  double tJ = 0.0, tS = 0.0;
  for (int i = 0; i <= n; ++i) {
    out.samples.push_back(sample_terms(ctx.pair, jc, tr.z[static_cast<std::size_t>(i)]));
    const auto& st = out.samples.back();
    const double wt = tr.weight(i);
    out.J += wt * st.FJ;
    out.S += wt * st.FS;
    const double frac = static_cast<double>(i) / n;
    tJ += wt * frac * dot(st.aJ, tr.zp[static_cast<std::size_t>(i)]);
    tS += wt * frac * dot(st.aS, tr.zp[static_cast<std::size_t>(i)]);
  }
  out.thetaJ = out.J / tr.period + tJ;
  out.thetaS = out.S / tr.period + tS;
  return out;
}

// ---------------------------------------------------------------------------
// Values.

inline double eval_cost(const EvalContext& ctx, const CostIntegrand& j) {
  double total = 0.0;
  for (int c : ctx.cost_components) {
    if (c < 0 || c >= static_cast<int>(ctx.traces.size())) continue;
    const auto& tr = ctx.traces[static_cast<std::size_t>(c)];
    for (int i = 0; i <= tr.intervals(); ++i) {
      const Vec2 z = tr.z[static_cast<std::size_t>(i)];
      total += tr.weight(i) * j(z, ctx.pair.y.eval(z)).j * norm(tr.zp[static_cast<std::size_t>(i)]);
    }
  }
  return total;
}

inline double eval_constraint(const EvalContext& ctx) {
  double total = 0.0;
  for (const auto& tr : ctx.traces)
    for (int i = 0; i <= tr.intervals(); ++i) {
      const Vec2 z = tr.z[static_cast<std::size_t>(i)];
      const double flux = dot(ctx.pair.grad_y(z).value, ctx.pair.g.gradient(z));
      total += tr.weight(i) * flux * flux;
    }
  return total;
}

/// Squared normal derivative against arc length: (Y . grad g)^2 / |grad g|^2 * |z'|.
inline double eval_neumann_form(const EvalContext& ctx) {
  double total = 0.0;
  for (const auto& tr : ctx.traces)
    for (int i = 0; i <= tr.intervals(); ++i) {
      const Vec2 z = tr.z[static_cast<std::size_t>(i)];
      const Vec2 gg = ctx.pair.g.gradient(z);
      const double flux = dot(ctx.pair.grad_y(z).value, gg);
      total += tr.weight(i) * flux * flux / dot(gg, gg) * norm(tr.zp[static_cast<std::size_t>(i)]);
    }
  return total;
}

/// Maximum of |Y . grad g| over all samples.
inline double max_neumann_defect(const EvalContext& ctx) {
  double m = 0.0;
  for (const auto& tr : ctx.traces)
    for (const Vec2& z : tr.z)
      m = std::max(m, std::abs(dot(ctx.pair.grad_y(z).value, ctx.pair.g.gradient(z))));
  return m;
}

// ---------------------------------------------------------------------------
// Directional derivatives.

/// Derivative of cJ * J + cS * S in direction (h, v), evaluated by solving the
/// system in variations on every component and the state variation once.
class Sensitivity {
 public:
  Sensitivity(const EvalContext& ctx, const CostIntegrand& j) : ctx_(&ctx), j_(j) {
    for (int c = 0; c < static_cast<int>(ctx.traces.size()); ++c)
      terms_.push_back(component_terms(ctx, &j_, c));
  }

  struct Parts {
    double dJ = 0.0, dS = 0.0;
  };

  Parts derivative(const LevelFunction& h, const ScalarField& v) const {
    const auto& ctx = *ctx_;
    Parts out;
    const bool h_zero = h.is_zero();
    const bool v_zero = v.max_abs() == 0.0;
    if (h_zero && v_zero) return out;
    ScalarField q = solve_state_variation(ctx.pair, h, v);
    const bool q_zero = q.max_abs() == 0.0;
    const GradientInterpolant Q = q_zero ? GradientInterpolant() : GradientInterpolant(q);
    for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
      const auto& tr = ctx.traces[c];
      const auto& ct = terms_[c];
      VariationSolution var;
      if (!h_zero) var = solve_variations(ctx.pair.g, h, tr);
      for (int i = 0; i <= tr.intervals(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const auto& st = ct.samples[k];
        const double wt = tr.weight(i);
        const Vec2 z = tr.z[k];
        if (!h_zero) {
          const Vec2 gh = h.gradient(z);
          out.dJ += wt * (dot(st.aJ, var.w[k]) + dot(st.bJ, perp(gh)));
          out.dS += wt * (dot(st.aS, var.w[k]) + dot(st.hS, gh));
        }
        if (!q_zero) {
          if (st.valueJ != 0.0) out.dJ += wt * st.valueJ * q.eval(z);
          out.dS += wt * dot(st.fluxS, Q(z).value);
        }
      }
      if (!h_zero) {
        out.dJ += var.theta * ct.thetaJ;
        out.dS += var.theta * ct.thetaS;
      }
    }
    return out;
  }

  double J() const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.J;
    return s;
  }
  double S() const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.S;
    return s;
  }
  const std::vector<ComponentTerms>& terms() const { return terms_; }
  const EvalContext& context() const { return *ctx_; }
  const CostIntegrand& integrand() const { return j_; }

 private:
  const EvalContext* ctx_;
  CostIntegrand j_;
  std::vector<ComponentTerms> terms_;
};

/// Hook that lets tests substitute a corrupted assembly.
using DerivativeFn = std::function<double(const EvalContext&, const LevelFunction&, const ScalarField&)>;

inline double dS(const EvalContext& ctx, const LevelFunction& h, const ScalarField& v) {
  static const CostIntegrand none = CostIntegrand::perimeter();
  return Sensitivity(ctx, none).derivative(h, v).dS;
}

inline double dJ(const EvalContext& ctx, const CostIntegrand& j, const LevelFunction& h,
                 const ScalarField& v) {
  return Sensitivity(ctx, j).derivative(h, v).dJ;
}

/// S'(g, u)(g, u): the derivative of S along the point itself.
inline double constraint_qualification(const EvalContext& ctx) {
  return dS(ctx, ctx.pair.g, ctx.pair.u);
}

}  // namespace hamshape
