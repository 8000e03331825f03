#pragma once

// Augmented-Lagrangian descent for  min J(g, u)  subject to  S(g, u) = 0  over
// the free coefficients of g and the nodal values of u:
//
//   L(g, u) = J + k S + (rho / 2) S^2.
//
// Inner iterations follow projected gradients (optionally L-BFGS directions)
// with an Armijo backtracking search; trial points that change the number of
// holes are accepted like any other. After each inner loop the multiplier is
// updated, k <- k + rho S, and rho grows tenfold when S has not shrunk by 4.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hamshape/adjoint.hpp"
#include "hamshape/core.hpp"
#include "hamshape/functionals.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/hamiltonian.hpp"
#include "hamshape/levelset.hpp"
#include "hamshape/random.hpp"
#include "hamshape/state_solver.hpp"

namespace hamshape {

struct OptimizeOptions {
  int max_iter = 200;
  int max_inner = 60;
  double tol_inner = 1e-4;
  double rho0 = 10.0;
  double k0 = 0.0;
  double tol_grad = 1e-6;
  double tol_S = 1e-6;
  double rho_max = 1e8;
  int lbfgs_memory = 8;      // 0 gives plain projected gradient steps
  double initial_step = 0.1;  // first step length in the gradient norm
  double armijo_c1 = 1e-4;
  double shrink = 0.5;
  int max_trials = 30;
  int max_idle_updates = 20;  // consecutive multiplier updates without a step before stopping
  bool optimize_u = true;
};

/// Fixed data of an optimization problem.
struct Problem {
  std::shared_ptr<const DirichletOperator> op;
  ScalarField f;
  CostIntegrand cost = CostIntegrand::perimeter();
  Vec2 anchor;
  TraceOptions trace;
  std::vector<int> cost_components{0};
  std::vector<char> free_terms;  // per basis term; empty means all free

  const Grid& grid() const { return op->grid(); }
  bool is_free(std::size_t k) const { return free_terms.empty() || free_terms[k]; }
};

/// A fully evaluated iterate.
struct Evaluation {
  EvalContext ctx;
  AdmissibilityReport report;
  double J = 0.0, S = 0.0;
};

/// Evaluates (g, u): admissibility, census, traces, J and S. Returns an
/// explanation instead when the point is not admissible or cannot be traced.
struct EvaluationResult {
  std::optional<Evaluation> eval;
  std::string failure;
};

inline EvaluationResult evaluate_point(const Problem& pb, const LevelFunction& g, const ScalarField& u,
                                       const ComponentCensus* previous = nullptr) {
  EvaluationResult out;
  try {
    Evaluation ev;
    ev.report = check_admissible(g, pb.grid());
    if (!ev.report.admissible) {
      out.failure = ev.report.summary();
      return out;
    }
    const auto hints = seed_hints(g, previous);
    auto census = extract_components(g, pb.grid(), pb.anchor, hints);
    ev.ctx = make_context(solve_state(pb.op, g, u, pb.f), std::move(census), pb.trace, pb.cost_components);
    ev.J = eval_cost(ev.ctx, pb.cost);
    ev.S = eval_constraint(ev.ctx);
    out.eval = std::move(ev);
  } catch (const Error& e) {
    out.failure = e.what();
  }
  return out;
}

struct HistoryRecord {
  int iter = 0;
  double J = 0.0, S = 0.0, L = 0.0, grad_norm = 0.0, k = 0.0, rho = 0.0, step = 0.0;
  std::size_t holes = 0;
  std::vector<double> periods;
  std::string event;
};

struct OptState {
  LevelFunction g;
  ScalarField u;
  double k = 0.0;
  double rho = 1.0;
  ComponentCensus census;
  int iter = 0;
  std::vector<HistoryRecord> history;
  Evaluation eval;
  std::string stop_reason;

  double L() const { return eval.J + k * eval.S + 0.5 * rho * eval.S * eval.S; }
};

inline double lagrangian(double J, double S, double k, double rho) {
  return J + k * S + 0.5 * rho * S * S;
}

// ---------------------------------------------------------------------------
// Pins on directions.

/// Orthogonal projector (in coefficient space, restricted to the free terms)
/// onto directions that vanish at every pin.
inline Eigen::MatrixXd pin_projector(const Problem& pb, const LevelFunction& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    if (pb.is_free(static_cast<std::size_t>(k))) F(k, k) = 1.0;
  const auto& pins = g.pins();
  if (pins.empty()) return F;
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(pins.size()), n);
  for (std::size_t i = 0; i < pins.size(); ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      phi(static_cast<Eigen::Index>(i), k) =
          F(k, k) * primitive_jet(g.basis()[static_cast<std::size_t>(k)], pins[i]).value;
  Eigen::MatrixXd gram = phi * phi.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() < gram.rows()) throw RankDeficient("pins cannot be held with the free basis terms");
  return F - phi.transpose() * qr.solve(phi);
}

/// Re-imposes the pins on the free coefficients after a step (minimal change).
inline LevelFunction reproject_pins(const Problem& pb, const LevelFunction& g) {
  if (g.pins().empty()) return g;
  double worst = 0.0;
  for (const Vec2& p : g.pins()) worst = std::max(worst, std::abs(g(p)));
  if (worst == 0.0) return g;
  std::vector<Primitive> basis;
  std::vector<double> coeffs;
  std::vector<std::size_t> map;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (pb.is_free(k)) {
      basis.push_back(g.basis()[k]);
      coeffs.push_back(0.0);
      map.push_back(k);
    }
  // Minimal correction of the free coefficients that zeroes g at the pins.
  std::vector<double> r;
  for (const Vec2& p : g.pins()) r.push_back(g(p));
  const auto m = static_cast<Eigen::Index>(r.size());
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd phi(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      phi(i, k) = primitive_jet(basis[static_cast<std::size_t>(k)], g.pins()[static_cast<std::size_t>(i)]).value;
  Eigen::VectorXd rv = Eigen::Map<Eigen::VectorXd>(r.data(), m);
  const Eigen::VectorXd delta = -phi.transpose() * (phi * phi.transpose()).colPivHouseholderQr().solve(rv);
  auto c = g.coeffs();
  for (Eigen::Index k = 0; k < n; ++k) c[map[static_cast<std::size_t>(k)]] += delta[k];
  return g.with_coeffs(std::move(c));
}

// ---------------------------------------------------------------------------
// Gradient of L.

struct Gradient {
  Eigen::VectorXd coeffs;  // projected coefficient gradient
  ScalarField u;           // L2 gradient in u
  double norm = 0.0;
};

/// Inner product on (coefficients, u): Euclidean on coefficients, discrete L2 on u.
inline double inner(const Eigen::VectorXd& a, const ScalarField& au, const Eigen::VectorXd& b,
                    const ScalarField& bu) {
  return a.dot(b) + l2_pairing(au, bu);
}

inline Gradient lagrangian_gradient(const Problem& pb, const Evaluation& ev, double k, double rho,
                                    bool with_u) {
  const auto& ctx = ev.ctx;
  const LevelFunction& g = ctx.pair.g;
  const double keff = k + rho * ev.S;
  const Sensitivity sens(ctx, pb.cost);
  const ScalarField zero(pb.grid());
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!pb.is_free(i)) continue;
    const auto d = sens.derivative(g.unit(i), zero);
    full[static_cast<Eigen::Index>(i)] = d.dJ + keff * d.dS;
  }
  Gradient out;
  out.coeffs = pin_projector(pb, g) * full;
  out.u = ScalarField(pb.grid());
  if (with_u) out.u = control_gradient(ctx.pair, solve_adjoint_pde(sens, keff));
  out.norm = std::sqrt(inner(out.coeffs, out.u, out.coeffs, out.u));
  return out;
}

/// Negative projected gradient (the steepest-descent direction in the inner product above).
inline std::pair<Eigen::VectorXd, ScalarField> descent_direction(const Problem& pb, const OptState& st,
                                                                 bool with_u = true) {
  auto gr = lagrangian_gradient(pb, st.eval, st.k, st.rho, with_u);
  gr.u *= -1.0;
  return {-gr.coeffs, std::move(gr.u)};
}

// ---------------------------------------------------------------------------
// Line search and multiplier update.

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  int trials = 0;
  bool topology_changed = false;
  std::string last_failure;
};

inline LineSearchResult line_search(const Problem& pb, OptState& st, const Eigen::VectorXd& dc,
                                    const ScalarField& du, double slope, double step0,
                                    const OptimizeOptions& opt) {
  LineSearchResult res;
  if (dc.norm() == 0.0 && du.max_abs() == 0.0) {
    res.accepted = true;
    return res;
  }
  const double L0 = st.L();
  double step = step0;
  for (int t = 0; t < opt.max_trials; ++t, step *= opt.shrink) {
    ++res.trials;
    auto c = st.g.coeffs();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += step * dc[static_cast<Eigen::Index>(i)];
    LevelFunction g = reproject_pins(pb, st.g.with_coeffs(std::move(c)));
    ScalarField u = st.u;
    u.axpy(step, du);
    auto r = evaluate_point(pb, g, u, &st.census);
    if (!r.eval) {
      res.last_failure = r.failure;
      continue;
    }
    const double L = lagrangian(r.eval->J, r.eval->S, st.k, st.rho);
    if (!(L <= L0 + opt.armijo_c1 * step * slope)) {
      res.last_failure = "Armijo condition not met";
      continue;
    }
    res.topology_changed = r.eval->ctx.census.holes != st.census.holes;
    st.g = std::move(g);
    st.u = std::move(u);
    st.census = r.eval->ctx.census;
    st.eval = std::move(*r.eval);
    res.accepted = true;
    res.step = step;
    return res;
  }
  return res;
}

/// k <- k + rho S; rho <- 10 rho (capped) when S did not shrink by 4 since
/// the previous update. `S_prev` carries that reference value.
inline void multiplier_update(OptState& st, double& S_prev, double rho_max = 1e8) {
  const double S = st.eval.S;
  st.k += st.rho * S;
  if (S > 0.25 * S_prev) st.rho = std::min(10.0 * st.rho, rho_max);
  S_prev = S;
}

// ---------------------------------------------------------------------------
// Driver.

inline HistoryRecord make_record(const OptState& st, double grad_norm, double step, std::string event) {
  HistoryRecord h;
  h.iter = st.iter;
  h.J = st.eval.J;
  h.S = st.eval.S;
  h.L = st.L();
  h.grad_norm = grad_norm;
  h.k = st.k;
  h.rho = st.rho;
  h.step = step;
  h.holes = st.census.holes;
  for (const auto& tr : st.eval.ctx.traces) h.periods.push_back(tr.period);
  h.event = std::move(event);
  return h;
}

inline void write_history_jsonl(std::ostream& os, const std::vector<HistoryRecord>& hist) {
  char buf[512];
  for (const auto& h : hist) {
    std::snprintf(buf, sizeof buf,
                  "{\"iter\":%d,\"J\":%.17g,\"S\":%.17g,\"L\":%.17g,\"grad_norm\":%.17g,\"k\":%.17g,"
                  "\"rho\":%.17g,\"step\":%.17g,\"holes\":%zu,\"period_per_component\":[",
                  h.iter, h.J, h.S, h.L, h.grad_norm, h.k, h.rho, h.step, h.holes);
    os << buf;
    for (std::size_t c = 0; c < h.periods.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%s%.17g", c ? "," : "", h.periods[c]);
      os << buf;
    }
    os << "],\"event\":\"" << h.event << "\"}\n";
  }
}

using IterationCallback = std::function<void(const OptState&, const HistoryRecord&)>;

inline OptState initial_state(const Problem& pb, const LevelFunction& g0, const ScalarField& u0,
                              const OptimizeOptions& opt) {
  OptState st;
  st.g = reproject_pins(pb, g0);
  st.u = u0;
  st.k = opt.k0;
  st.rho = opt.rho0;
  auto r = evaluate_point(pb, st.g, st.u);
  if (!r.eval) throw InvalidInput("initial level function rejected: " + r.failure);
  st.eval = std::move(*r.eval);
  st.census = st.eval.ctx.census;
  return st;
}

inline OptState optimize(const Problem& pb, OptState st, const OptimizeOptions& opt,
                         const IterationCallback& on_iter = {}) {
  struct Pair {
    Eigen::VectorXd sc, yc;
    ScalarField su, yu;
    double rho;
  };
  std::deque<Pair> memory;
  double S_prev = st.eval.S;
  int inner_iters = 0;
  int failures_since_update = 0;
  int idle_updates = 0;

  auto grad = lagrangian_gradient(pb, st.eval, st.k, st.rho, opt.optimize_u);
  auto record = [&](double step, std::string event) {
    st.history.push_back(make_record(st, grad.norm, step, std::move(event)));
    if (on_iter) on_iter(st, st.history.back());
  };
  record(0.0, "initial");

  auto outer_update = [&](const char* why) {
    multiplier_update(st, S_prev, opt.rho_max);
    memory.clear();
    inner_iters = 0;
    grad = lagrangian_gradient(pb, st.eval, st.k, st.rho, opt.optimize_u);
    record(0.0, std::string("multiplier_update:") + why);
  };

  while (true) {
    if (grad.norm <= opt.tol_grad && st.eval.S <= opt.tol_S) {
      st.stop_reason = "converged";
      break;
    }
    if (st.iter >= opt.max_iter) {
      st.stop_reason = "max_iter";
      break;
    }
    if (inner_iters >= opt.max_inner || grad.norm <= opt.tol_inner) {
      if (++idle_updates > opt.max_idle_updates) {
        st.stop_reason = "stalled";
        break;
      }
      outer_update(inner_iters >= opt.max_inner ? "inner_cap" : "inner_converged");
      continue;
    }

    // Two-loop recursion in the (coefficients, L2) inner product.
    Eigen::VectorXd dc = -grad.coeffs;
    ScalarField du = grad.u;
    du *= -1.0;
    double step0 = opt.initial_step / std::max(grad.norm, 1e-300);
    if (opt.lbfgs_memory > 0 && !memory.empty()) {
      std::vector<double> alpha(memory.size());
      for (std::size_t i = memory.size(); i-- > 0;) {
        const auto& m = memory[i];
        alpha[i] = m.rho * inner(m.sc, m.su, dc, du);
        dc -= alpha[i] * m.yc;
        du.axpy(-alpha[i], m.yu);
      }
      const auto& last = memory.back();
      const double gamma = inner(last.sc, last.su, last.yc, last.yu) / inner(last.yc, last.yu, last.yc, last.yu);
      dc *= gamma;
      du *= gamma;
      for (std::size_t i = 0; i < memory.size(); ++i) {
        const auto& m = memory[i];
        const double beta = m.rho * inner(m.yc, m.yu, dc, du);
        dc += (alpha[i] - beta) * m.sc;
        du.axpy(alpha[i] - beta, m.su);
      }
      step0 = 1.0;
    }
    double slope = inner(grad.coeffs, grad.u, dc, du);
    if (!(slope < 0.0)) {
      // Not a descent direction: fall back to the negative gradient.
      memory.clear();
      dc = -grad.coeffs;
      du = grad.u;
      du *= -1.0;
      slope = -grad.norm * grad.norm;
      step0 = opt.initial_step / std::max(grad.norm, 1e-300);
    }

    const Eigen::VectorXd c_old = Eigen::Map<const Eigen::VectorXd>(st.g.coeffs().data(),
                                                                    static_cast<Eigen::Index>(st.g.size()));
    const ScalarField u_old = st.u;
    const auto ls = line_search(pb, st, dc, du, slope, step0, opt);
    ++st.iter;
    ++inner_iters;
    idle_updates = 0;
    if (!ls.accepted) {
      memory.clear();
      ++failures_since_update;
      record(0.0, "no_decrease:" + ls.last_failure);
      if (failures_since_update >= 2) {
        st.stop_reason = "no_decrease";
        break;
      }
      outer_update("line_search_failed");
      continue;
    }
    failures_since_update = 0;
    const auto old_grad = grad;
    grad = lagrangian_gradient(pb, st.eval, st.k, st.rho, opt.optimize_u);
    if (ls.topology_changed) {
      memory.clear();
    } else if (opt.lbfgs_memory > 0) {
      Pair p;
      p.sc = Eigen::Map<const Eigen::VectorXd>(st.g.coeffs().data(), static_cast<Eigen::Index>(st.g.size())) - c_old;
      p.su = st.u - u_old;
      p.yc = grad.coeffs - old_grad.coeffs;
      p.yu = grad.u - old_grad.u;
      const double sy = inner(p.sc, p.su, p.yc, p.yu);
      if (sy > 1e-12 * std::sqrt(inner(p.sc, p.su, p.sc, p.su) * inner(p.yc, p.yu, p.yc, p.yu))) {
        p.rho = 1.0 / sy;
        memory.push_back(std::move(p));
        if (static_cast<int>(memory.size()) > opt.lbfgs_memory) memory.pop_front();
      }
    }
    record(ls.step, ls.topology_changed ? "topology_change" : "step");
  }
  record(0.0, "stop:" + st.stop_reason);
  return st;
}

// ---------------------------------------------------------------------------
// Probe directions for residual diagnostics.

/// Deterministic probe directions: random pinned combinations of the free
/// basis terms paired with random sums of smooth bumps for v.
inline std::vector<ProbeDirection> make_probes(const Problem& pb, const LevelFunction& g, int count,
                                               std::uint64_t seed, double v_scale = 1.0) {
  std::vector<ProbeDirection> out;
  if (count <= 0) return out;
  const Eigen::MatrixXd P = pin_projector(pb, g);
  const Grid& grid = pb.grid();
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd c(static_cast<Eigen::Index>(g.size()));
    for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = rng.next(-1.0, 1.0);
    c = P * c;
    ProbeDirection pr;
    pr.h = g.with_coeffs(std::vector<double>(c.data(), c.data() + c.size()));
    pr.v = ScalarField(grid);
    for (int b = 0; b < 3; ++b) {
      const Vec2 ctr{rng.next(grid.x_min, grid.x_max), rng.next(grid.y_min, grid.y_max)};
      const double w = rng.next(0.2, 0.6) * 0.25 * std::min(grid.x_max - grid.x_min, grid.y_max - grid.y_min);
      const double amp = v_scale * rng.next(-1.0, 1.0);
      for (int jj = 0; jj < grid.ny; ++jj)
        for (int ii = 0; ii < grid.nx; ++ii) {
          const Vec2 d = grid.node(ii, jj) - ctr;
          pr.v.at(ii, jj) += amp * std::exp(-dot(d, d) / (2 * w * w));
        }
    }
    out.push_back(std::move(pr));
  }
  return out;
}

}  // namespace hamshape
