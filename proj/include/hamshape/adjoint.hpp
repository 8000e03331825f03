#pragma once

// Adjoint states for J + k S: the transposition solution p of the state
// equation and, per boundary curve, the backward solution m of the adjoint of
// the system in variations. With them the derivative in any direction (h, v)
// is assembled without solving a variation problem for that direction.
//
// The backward solve is the exact adjoint of the fixed-step forward scheme:
// it sweeps the same Runge-Kutta stages in reverse, so the assembled residual
// and the direct derivatives agree to rounding error.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "hamshape/core.hpp"
#include "hamshape/functionals.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/hamiltonian.hpp"
#include "hamshape/ode.hpp"

namespace hamshape {

/// Backward adjoint along one curve.
struct ComponentAdjoint {
  std::vector<Vec2> m;         // cotangent of w at each sample, m[0] is m(0)
  Vec2 m_terminal;             // terminal condition at t = T
  std::vector<Vec2> stage_z;   // forward stage positions, 6 per step
  std::vector<Vec2> stage_m;   // stage cotangents paired with b at stage_z
  std::vector<SampleTerms> samples;
  bool cost = false;
};

struct AdjointBundle {
  ScalarField p;
  std::vector<ComponentAdjoint> components;
  double k = 0.0;
};

/// Curve sources pairing the state variation with J + k S: value density
/// d2 j |z'| on cost curves and flux density 2k (Y . grad g) grad g on all.
inline std::vector<CurveSource> adjoint_sources(const Sensitivity& sens, double k) {
  const auto& ctx = sens.context();
  std::vector<CurveSource> out;
  for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
    const auto& tr = ctx.traces[c];
    const auto& ct = sens.terms()[c];
    CurveSource src;
    src.points = tr.z;
    for (int i = 0; i <= tr.intervals(); ++i) {
      const auto& st = ct.samples[static_cast<std::size_t>(i)];
      src.weights.push_back(tr.weight(i));
      src.value_density.push_back(st.valueJ);
      src.flux_density.push_back(st.fluxS * k);
    }
    out.push_back(std::move(src));
  }
  return out;
}

inline ScalarField solve_adjoint_pde(const Sensitivity& sens, double k) {
  const auto src = adjoint_sources(sens, k);
  return solve_adjoint_transposition(*sens.context().pair.op, src);
}

inline ScalarField solve_adjoint_pde(const EvalContext& ctx, const CostIntegrand& j, double k) {
  return solve_adjoint_pde(Sensitivity(ctx, j), k);
}

namespace detail {

inline ComponentAdjoint backward_component(const LevelFunction& g, const BoundaryTrace& tr,
                                           const ComponentTerms& ct, double k, bool cost) {
  ComponentAdjoint out;
  out.cost = cost;
  out.samples = ct.samples;
  const int n = tr.intervals(), m = tr.substeps;
  const long steps = static_cast<long>(n) * m;
  const double h = tr.step();

  // Forward replay storing the stage positions.
  out.stage_z.resize(static_cast<std::size_t>(steps) * 6);
  {
    auto f = [&g](const ode::State<2>& s) { return detail::hamiltonian_rhs(g, s); };
    ode::State<2> y{tr.seed.x, tr.seed.y};
    std::array<ode::State<2>, 6> st;
    for (long s = 0; s < steps; ++s) {
      y = ode::fixed_step<2>(f, y, h, st.data());
      for (int r = 0; r < 6; ++r) out.stage_z[static_cast<std::size_t>(s) * 6 + r] = {st[r][0], st[r][1]};
    }
  }
  std::vector<Mat2> stage_M(out.stage_z.size());
  for (std::size_t s = 0; s < out.stage_z.size(); ++s) stage_M[s] = variation_matrix(g.jet(out.stage_z[s]));

  auto alpha = [&](int i) {
    const auto& st = ct.samples[static_cast<std::size_t>(i)];
    return (st.aJ + st.aS * k) * tr.weight(i);
  };
  const auto [e, ez] = period_branch(tr);
  const double C = ct.thetaJ + k * ct.thetaS;
  out.m_terminal = e * (-C / ez);

  out.m.assign(static_cast<std::size_t>(n) + 1, Vec2{});
  out.stage_m.assign(out.stage_z.size(), Vec2{});
  Vec2 lam = alpha(n) + out.m_terminal;
  out.m[static_cast<std::size_t>(n)] = lam;
  for (long s = steps - 1; s >= 0; --s) {
    std::array<Vec2, 6> Wbar{};
    Vec2 acc = lam;
    for (int r = 5; r >= 0; --r) {
      Vec2 Kbar = lam * (h * ode::dp::b[r]);
      for (int q = r + 1; q < 6; ++q)
        if (ode::dp::a[q][r] != 0.0) Kbar += Wbar[q] * (h * ode::dp::a[q][r]);
      const std::size_t idx = static_cast<std::size_t>(s) * 6 + r;
      out.stage_m[idx] = Kbar;
      Wbar[r] = stage_M[idx].transposed() * Kbar;
      acc += Wbar[r];
    }
    lam = acc;
    if (s % m == 0) {
      const int i = static_cast<int>(s / m);
      lam += alpha(i);
      out.m[static_cast<std::size_t>(i)] = lam;
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<ComponentAdjoint> solve_adjoint_odes(const Sensitivity& sens, double k) {
  const auto& ctx = sens.context();
  std::vector<ComponentAdjoint> out;
  for (std::size_t c = 0; c < ctx.traces.size(); ++c)
    out.push_back(detail::backward_component(ctx.pair.g, ctx.traces[c], sens.terms()[c], k,
                                             ctx.is_cost(static_cast<int>(c))));
  return out;
}

inline AdjointBundle assemble_adjoint(const Sensitivity& sens, double k) {
  AdjointBundle b;
  b.k = k;
  b.p = solve_adjoint_pde(sens, k);
  b.components = solve_adjoint_odes(sens, k);
  return b;
}

/// Maximum-principle residual in direction (h, v): boundary integrals of the
/// direct h-dependence, the volume pairing of p with the state source, and
/// the pairing of m with (-d2 h, d1 h) along each curve. Equals
/// dJ + k dS in that direction.
inline double optimality_residual(const EvalContext& ctx, const AdjointBundle& b,
                                  const LevelFunction& h, const ScalarField& v) {
  double r = 0.0;
  const bool h_zero = h.is_zero();
  if (!h_zero || v.max_abs() != 0.0) {
    const ScalarField mu = variation_source(ctx.pair, h, v);
    r += l2_pairing(b.p, mu);
  }
  if (h_zero) return r;
  for (std::size_t c = 0; c < ctx.traces.size(); ++c) {
    const auto& tr = ctx.traces[c];
    const auto& ca = b.components[c];
    for (int i = 0; i <= tr.intervals(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      const auto& st = ca.samples[k];
      const Vec2 gh = h.gradient(tr.z[k]);
      r += tr.weight(i) * (dot(st.bJ, perp(gh)) + b.k * dot(st.hS, gh));
    }
    for (std::size_t s = 0; s < ca.stage_z.size(); ++s)
      r += dot(ca.stage_m[s], perp(h.gradient(ca.stage_z[s])));
    r += dot(ca.m.front() - ca.m_terminal, seed_shift(ctx.pair.g, h, tr));
  }
  return r;
}

/// L2 gradient of the residual with respect to v: p g_+^2.
inline ScalarField control_gradient(const ControlPair& pair, const ScalarField& p) {
  ScalarField out(pair.grid());
  for (std::size_t k = 0; k < out.grid().size(); ++k) out[k] = p[k] * pair.g_plus[k] * pair.g_plus[k];
  return out;
}

// ---------------------------------------------------------------------------
// Multiplier estimate.

struct MultiplierFit {
  double k = 0.0;
  double residual_norm = 0.0;  // || dJ + k dS || over the probes
  double dJ_norm = 0.0;
  bool reliable = true;
};

/// Least-squares k in dJ_i + k dS_i = 0.
inline MultiplierFit estimate_multiplier(const std::vector<double>& dJs, const std::vector<double>& dSs) {
  MultiplierFit fit;
  double ss = 0.0, sj = 0.0, jj = 0.0;
  for (std::size_t i = 0; i < dJs.size(); ++i) {
    ss += dSs[i] * dSs[i];
    sj += dSs[i] * dJs[i];
    jj += dJs[i] * dJs[i];
  }
  fit.dJ_norm = std::sqrt(jj);
  if (!(ss > 1e-28 * (1.0 + jj))) {
    fit.reliable = false;
    fit.residual_norm = fit.dJ_norm;
    return fit;
  }
  fit.k = -sj / ss;
  double rr = 0.0;
  for (std::size_t i = 0; i < dJs.size(); ++i) {
    const double e = dJs[i] + fit.k * dSs[i];
    rr += e * e;
  }
  fit.residual_norm = std::sqrt(rr);
  return fit;
}

struct ProbeDirection {
  LevelFunction h;
  ScalarField v;
};

struct ProbeRecord {
  double dJ = 0.0, dS = 0.0, residual = 0.0, k = 0.0;
};

inline void write_probe_jsonl(std::ostream& os, const std::vector<ProbeRecord>& recs) {
  char buf[256];
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "{\"probe\":%zu,\"dJ\":%.17g,\"dS\":%.17g,\"residual\":%.17g,\"k\":%.17g}\n", i,
                  recs[i].dJ, recs[i].dS, recs[i].residual, recs[i].k);
    os << buf;
  }
}

struct ResidualReport {
  MultiplierFit fit;
  std::vector<ProbeRecord> probes;
  double max_residual = 0.0;
  double max_equivalence_error = 0.0;  // |res - dJ - k dS| / (1 + |dJ| + |k dS|)
};

/// Estimates k on the probes (unless `k_forced`), assembles the adjoints and
/// evaluates the residual on every probe.
inline ResidualReport residual_report(const EvalContext& ctx, const CostIntegrand& j,
                                      const std::vector<ProbeDirection>& probes,
                                      const double* k_forced = nullptr) {
  ResidualReport rep;
  if (probes.empty()) return rep;
  const Sensitivity sens(ctx, j);
  std::vector<double> dJs, dSs;
  for (const auto& pr : probes) {
    const auto d = sens.derivative(pr.h, pr.v);
    dJs.push_back(d.dJ);
    dSs.push_back(d.dS);
  }
  rep.fit = estimate_multiplier(dJs, dSs);
  if (k_forced) {
    rep.fit.k = *k_forced;
    rep.fit.reliable = true;
  }
  const double k = rep.fit.k;
  const AdjointBundle bundle = assemble_adjoint(sens, k);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    ProbeRecord rec{dJs[i], dSs[i], optimality_residual(ctx, bundle, probes[i].h, probes[i].v), k};
    rep.max_residual = std::max(rep.max_residual, std::abs(rec.residual));
    const double err = std::abs(rec.residual - rec.dJ - k * rec.dS) /
                       (1.0 + std::abs(rec.dJ) + std::abs(k * rec.dS));
    rep.max_equivalence_error = std::max(rep.max_equivalence_error, err);
    rep.probes.push_back(rec);
  }
  return rep;
}

}  // namespace hamshape
