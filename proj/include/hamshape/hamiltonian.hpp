#pragma once

// Periodic orbits of x' = (-d2 g, d1 g) through a seed on {g = 0}, the linear
// system in variations along them, and the period derivative.
//
// The orbit is first located with an adaptive integrator and a Poincare
// section through the seed. It is then re-integrated with a fixed number of
// equal steps whose length is Newton-corrected so that the discrete map
// itself returns to the section; the same steps carry the variations, so
// every derivative computed here is the derivative of the discrete orbit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hamshape/core.hpp"
#include "hamshape/levelset.hpp"
#include "hamshape/ode.hpp"

namespace hamshape {

struct TraceOptions {
  int n_samples = 512;  // sample intervals; must be even for Simpson's rule
  double ode_tol = 1e-10;
  double period_tol = 1e-8;
  int substeps = 0;  // fixed steps per sample interval; 0 picks from the adaptive pass
  double arc_budget = 100.0;  // maximum arc length in units of diam(D)
};

/// Hamiltonian velocity field of g at a jet: (-d2 g, d1 g).
inline Vec2 hamiltonian_velocity(const Jet2& j) { return perp(j.grad); }

struct BoundaryTrace {
  Vec2 seed;
  std::vector<double> times;
  std::vector<Vec2> z;
  std::vector<Vec2> zp;
  double period = 0.0;
  int component_id = 0;
  int substeps = 1;
  bool pinned = false;

  int intervals() const { return static_cast<int>(times.size()) - 1; }
  double step() const { return period / (static_cast<double>(intervals()) * substeps); }

  /// Composite Simpson weight of sample i.
  double weight(int i) const {
    const int n = intervals();
    const double base = period / (3.0 * n);
    if (i == 0 || i == n) return base;
    return base * ((i % 2) ? 4.0 : 2.0);
  }

  /// Twice the signed area enclosed by the sample polygon (positive when counterclockwise).
  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i + 1 < z.size(); ++i) a += z[i].x * z[i + 1].y - z[i + 1].x * z[i].y;
    return 0.5 * a;
  }
};

namespace detail {

inline ode::State<2> hamiltonian_rhs(const LevelFunction& g, const ode::State<2>& s) {
  const Vec2 v = hamiltonian_velocity(g.jet({s[0], s[1]}));
  return {v.x, v.y};
}

// Fixed-step orbit from x0 over n steps of length h.
inline Vec2 shoot(const LevelFunction& g, Vec2 x0, double h, long n) {
  auto f = [&g](const ode::State<2>& s) { return hamiltonian_rhs(g, s); };
  ode::State<2> y{x0.x, x0.y};
  for (long k = 0; k < n; ++k) y = ode::fixed_step<2>(f, y, h);
  return {y[0], y[1]};
}

}  // namespace detail

/// Samples of the fixed-step orbit from x0: `intervals` + 1 points spaced
/// `substeps` steps of length h apart.
inline std::vector<Vec2> sample_orbit(const LevelFunction& g, Vec2 x0, double h, int substeps,
                                      int intervals) {
  auto f = [&g](const ode::State<2>& s) { return detail::hamiltonian_rhs(g, s); };
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(intervals) + 1);
  ode::State<2> y{x0.x, x0.y};
  out.push_back(x0);
  for (int i = 0; i < intervals; ++i) {
    for (int k = 0; k < substeps; ++k) y = ode::fixed_step<2>(f, y, h);
    out.push_back({y[0], y[1]});
  }
  return out;
}

/// Adaptive pass: first transversal return to the line through the seed
/// orthogonal to the initial velocity. Returns the approximate period and
/// the number of accepted steps.
inline std::pair<double, std::size_t> detect_period(const LevelFunction& g, Vec2 seed,
                                                    const TraceOptions& opt, double diam) {
  const Vec2 v0 = hamiltonian_velocity(g.jet(seed));
  const double speed = norm(v0);
  auto f = [&g](const ode::State<2>& s) { return detail::hamiltonian_rhs(g, s); };
  auto section = [&](const ode::State<2>& s) { return dot(Vec2{s[0], s[1]} - seed, v0); };

  double arc = 0.0, period = -1.0;
  bool left = false;
  const double budget = opt.arc_budget * diam;
  const std::size_t steps = ode::integrate_adaptive<2>(
      f, ode::State<2>{seed.x, seed.y}, 1e-3 * diam / speed, opt.ode_tol,
      [&](const ode::Segment<2>& seg) {
        arc += norm(Vec2{seg.y1[0] - seg.y0[0], seg.y1[1] - seg.y0[1]});
        if (arc > budget) throw NoReturn("orbit did not close within the arc-length budget");
        const double s0 = section(seg.y0), s1 = section(seg.y1);
        if (s1 > 0.0) left = true;
        if (!(left && s0 < 0.0 && s1 >= 0.0)) return true;
        double a = seg.t0, b = seg.t1;
        for (int it = 0; it < 200 && b - a > opt.period_tol * 1e-3 * (1.0 + b); ++it) {
          const double m = 0.5 * (a + b);
          (section(seg.at(m)) < 0.0 ? a : b) = m;
        }
        const double tc = 0.5 * (a + b);
        const auto p = seg.at(tc);
        // Other crossings of the section line lie on distant arcs of the curve.
        if (norm(Vec2{p[0], p[1]} - seed) > 1e-3 * arc) return true;
        period = tc;
        return false;
      });
  if (period <= 0.0) throw NoReturn("orbit did not return to its seed");
  return {period, steps};
}

/// Traces the closed orbit of the Hamiltonian field through `seed`.
inline BoundaryTrace trace_orbit(const LevelFunction& g, Vec2 seed, const TraceOptions& opt,
                                 double diam, int component_id = 0) {
  if (opt.n_samples < 2 || opt.n_samples % 2) throw InvalidInput("n_samples must be even and >= 2");
  const Jet2 j0 = g.jet(seed);
  if (std::abs(j0.value) > 1e-10 * (1.0 + norm(j0.grad)))
    throw InvalidInput("seed is not on the zero set (g = " + std::to_string(j0.value) + ")");
  const Vec2 v0 = hamiltonian_velocity(j0);
  if (norm(v0) < 1e-12) throw DegenerateTrace("gradient vanishes at the seed");

  auto [t1, steps1] = detect_period(g, seed, opt, diam);
  const int n = opt.n_samples;
  int m = opt.substeps > 0 ? opt.substeps
                           : std::max(2, static_cast<int>(std::ceil(1.5 * steps1 / n)));

  for (int attempt = 0;; ++attempt) {
    const long total = static_cast<long>(n) * m;
    double period = t1;
    for (int it = 0; it < 30; ++it) {
      const Vec2 zt = detail::shoot(g, seed, period / total, total);
      const double s = dot(zt - seed, v0);
      const double ds = dot(hamiltonian_velocity(g.jet(zt)), v0);
      const double dt = s / ds;
      period -= dt;
      if (std::abs(dt) <= 1e-15 * period) break;
    }

    BoundaryTrace tr;
    tr.seed = seed;
    tr.period = period;
    tr.component_id = component_id;
    tr.substeps = m;
    for (const Vec2& p : g.pins())
      if (p.x == seed.x && p.y == seed.y) tr.pinned = true;
    tr.z = sample_orbit(g, seed, period / total, m, n);
    tr.times.resize(tr.z.size());
    tr.zp.resize(tr.z.size());
    double drift = 0.0;
    for (std::size_t i = 0; i < tr.z.size(); ++i) {
      tr.times[i] = period * static_cast<double>(i) / n;
      const Jet2 jt = g.jet(tr.z[i]);
      tr.zp[i] = hamiltonian_velocity(jt);
      drift = std::max(drift, std::abs(jt.value));
    }
    if (norm(tr.z.back() - seed) > opt.period_tol * (1.0 + norm(seed)))
      throw NoReturn("fixed-step orbit does not close at the detected period");
    if (drift <= 1e-8 || opt.substeps > 0 || attempt >= 4) return tr;
    m *= 2;
  }
}

/// Traces every boundary curve of a census.
inline std::vector<BoundaryTrace> trace_components(const LevelFunction& g,
                                                   const ComponentCensus& census,
                                                   const TraceOptions& opt, double diam) {
  std::vector<BoundaryTrace> out;
  for (std::size_t c = 0; c < census.components.size(); ++c) {
    out.push_back(trace_orbit(g, census.components[c].seed, opt, diam, static_cast<int>(c)));
    out.back().pinned = census.components[c].pinned || out.back().pinned;
  }
  return out;
}

/// Trace of a perturbed level function that reuses the sample count and the
/// step subdivision of `base`, starting from the base seed projected onto the
/// new zero set (the seed is unchanged when it is pinned).
inline BoundaryTrace retrace(const LevelFunction& g, const BoundaryTrace& base,
                             const TraceOptions& opt, double diam) {
  TraceOptions o = opt;
  o.n_samples = base.intervals();
  o.substeps = base.substeps;
  const Vec2 seed = base.pinned ? base.seed : newton_project(g, base.seed).point;
  auto tr = trace_orbit(g, seed, o, diam, base.component_id);
  tr.pinned = base.pinned;
  return tr;
}

// ---------------------------------------------------------------------------
// System in variations: w' = M(z) w + b(z), M = D(-d2 g, d1 g), b = (-d2 h, d1 h).

/// Matrix of the linearized Hamiltonian field: M w = perp(H[g] w).
inline Mat2 variation_matrix(const Jet2& j) {
  return {-j.hess.a21, -j.hess.a22, j.hess.a11, j.hess.a12};
}

struct VariationSolution {
  std::vector<Vec2> w;  // aligned with the trace samples
  Vec2 w0;
  double theta = 0.0;
};

/// First-order motion of the seed when it is not pinned: the derivative of
/// the Newton projection onto {g + lambda h = 0}.
inline Vec2 seed_shift(const LevelFunction& g, const LevelFunction& h, const BoundaryTrace& tr) {
  if (tr.pinned) return {};
  const Jet2 j = g.jet(tr.seed);
  return j.grad * (-h(tr.seed) / dot(j.grad, j.grad));
}

/// Period derivative from the terminal variation; the coordinate with the
/// larger terminal velocity component is used.
inline double period_derivative(const BoundaryTrace& tr, const VariationSolution& var) {
  const Vec2 zp = tr.zp.back();
  const Vec2 dw = var.w.back() - var.w0;
  if (std::abs(zp.x) < 1e-12 && std::abs(zp.y) < 1e-12)
    throw DegenerateTrace("terminal velocity vanishes");
  if (std::abs(zp.y) >= std::abs(zp.x)) return -dw.y / zp.y;
  return -dw.x / zp.x;
}

/// Unit covector e and velocity component e.z'(T) used by period_derivative.
inline std::pair<Vec2, double> period_branch(const BoundaryTrace& tr) {
  const Vec2 zp = tr.zp.back();
  if (std::abs(zp.x) < 1e-12 && std::abs(zp.y) < 1e-12)
    throw DegenerateTrace("terminal velocity vanishes");
  if (std::abs(zp.y) >= std::abs(zp.x)) return {{0.0, 1.0}, zp.y};
  return {{1.0, 0.0}, zp.x};
}

inline VariationSolution solve_variations(const LevelFunction& g, const LevelFunction& h,
                                          const BoundaryTrace& tr, Vec2 w0) {
  auto f = [&](const ode::State<4>& s) -> ode::State<4> {
    const Vec2 z{s[0], s[1]}, w{s[2], s[3]};
    const Jet2 jg = g.jet(z);
    const Vec2 v = hamiltonian_velocity(jg);
    const Vec2 dw = variation_matrix(jg) * w + perp(h.gradient(z));
    return {v.x, v.y, dw.x, dw.y};
  };
  VariationSolution out;
  out.w0 = w0;
  out.w.reserve(tr.z.size());
  out.w.push_back(w0);
  ode::State<4> y{tr.seed.x, tr.seed.y, w0.x, w0.y};
  const double hstep = tr.step();
  for (int i = 0; i < tr.intervals(); ++i) {
    for (int k = 0; k < tr.substeps; ++k) y = ode::fixed_step<4>(f, y, hstep);
    out.w.push_back({y[2], y[3]});
  }
  out.theta = period_derivative(tr, out);
  return out;
}

inline VariationSolution solve_variations(const LevelFunction& g, const LevelFunction& h,
                                          const BoundaryTrace& tr) {
  return solve_variations(g, h, tr, seed_shift(g, h, tr));
}

// ---------------------------------------------------------------------------
// CSV: comment lines "# seed=x,y", "# period=T", "# component=c", then a
// header "t,z1,z2,z1p,z2p" and one row per sample.

inline void write_trace_csv(std::ostream& os, const BoundaryTrace& tr) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "# seed=%.17g,%.17g\n# period=%.17g\n# component=%d\n", tr.seed.x,
                tr.seed.y, tr.period, tr.component_id);
  os << buf << "t,z1,z2,z1p,z2p\n";
  for (std::size_t i = 0; i < tr.z.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", tr.times[i], tr.z[i].x,
                  tr.z[i].y, tr.zp[i].x, tr.zp[i].y);
    os << buf;
  }
}

inline BoundaryTrace read_trace_csv(std::istream& is) {
  BoundaryTrace tr;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# seed=", 0) == 0) {
      std::sscanf(line.c_str() + 7, "%lf,%lf", &tr.seed.x, &tr.seed.y);
    } else if (line.rfind("# period=", 0) == 0) {
      tr.period = std::stod(line.substr(9));
    } else if (line.rfind("# component=", 0) == 0) {
      tr.component_id = std::stoi(line.substr(12));
    } else if (line.rfind("t,", 0) == 0) {
      header = true;
    } else if (line[0] != '#') {
      double t, a, b, c, d;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &t, &a, &b, &c, &d) != 5)
        throw InvalidInput("bad trace row: " + line);
      tr.times.push_back(t);
      tr.z.push_back({a, b});
      tr.zp.push_back({c, d});
    }
  }
  if (!header || tr.z.size() < 3) throw InvalidInput("trace csv lacks header or samples");
  return tr;
}

}  // namespace hamshape
