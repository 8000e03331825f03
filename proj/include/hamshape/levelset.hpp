#pragma once

// Level functions g as closed-form basis expansions, admissibility checks,
// zero-set scanning and the component census of the domain {g < 0}.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hamshape/core.hpp"
#include "hamshape/grid.hpp"

namespace hamshape {

/// x^px * y^py, total degree <= 4.
struct Monomial {
  int px = 0, py = 0;

  Jet2 jet(Vec2 p) const {
    auto pw = [](double b, int e) { return e < 0 ? 0.0 : std::pow(b, e); };
    Jet2 j;
    j.value = pw(p.x, px) * pw(p.y, py);
    j.grad = {px * pw(p.x, px - 1) * pw(p.y, py), py * pw(p.x, px) * pw(p.y, py - 1)};
    j.hess.a11 = px * (px - 1) * pw(p.x, px - 2) * pw(p.y, py);
    j.hess.a22 = py * (py - 1) * pw(p.x, px) * pw(p.y, py - 2);
    j.hess.a12 = j.hess.a21 = px * py * pw(p.x, px - 1) * pw(p.y, py - 1);
    return j;
  }
  bool operator==(const Monomial&) const = default;
};

/// exp(-|x - center|^2 / (2 width^2)).
struct Gaussian {
  Vec2 center;
  double width = 1.0;

  Jet2 jet(Vec2 p) const {
    const Vec2 d = p - center;
    const double s2 = width * width;
    const double e = std::exp(-dot(d, d) / (2 * s2));
    Jet2 j;
    j.value = e;
    j.grad = d * (-e / s2);
    j.hess.a11 = e * (d.x * d.x / s2 - 1.0) / s2;
    j.hess.a22 = e * (d.y * d.y / s2 - 1.0) / s2;
    j.hess.a12 = j.hess.a21 = e * d.x * d.y / (s2 * s2);
    return j;
  }
  bool operator==(const Gaussian& o) const {
    return center.x == o.center.x && center.y == o.center.y && width == o.width;
  }
};

/// ((x - cx)/a)^2 + ((y - cy)/b)^2 - 1; a == b gives a circle.
struct Ellipse {
  Vec2 center;
  double a = 1.0, b = 1.0;

  Jet2 jet(Vec2 p) const {
    const Vec2 d = p - center;
    const double ia2 = 1.0 / (a * a), ib2 = 1.0 / (b * b);
    Jet2 j;
    j.value = d.x * d.x * ia2 + d.y * d.y * ib2 - 1.0;
    j.grad = {2 * d.x * ia2, 2 * d.y * ib2};
    j.hess = {2 * ia2, 0.0, 0.0, 2 * ib2};
    return j;
  }
  bool operator==(const Ellipse& o) const {
    return center.x == o.center.x && center.y == o.center.y && a == o.a && b == o.b;
  }
};

using Primitive = std::variant<Monomial, Gaussian, Ellipse>;

inline Jet2 primitive_jet(const Primitive& p, Vec2 x) {
  return std::visit([x](const auto& prim) { return prim.jet(x); }, p);
}

/// g(x) = sum_k coeff_k * basis_k(x), with exact gradient and Hessian.
class LevelFunction {
 public:
  LevelFunction() = default;
  LevelFunction(std::vector<Primitive> basis, std::vector<double> coeffs,
                std::vector<Vec2> pins = {})
      : basis_(std::move(basis)), coeffs_(std::move(coeffs)), pins_(std::move(pins)) {
    if (basis_.size() != coeffs_.size()) throw InvalidInput("basis/coefficient size mismatch");
  }

  const std::vector<Primitive>& basis() const { return basis_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::vector<double>& coeffs() { return coeffs_; }
  const std::vector<Vec2>& pins() const { return pins_; }
  std::size_t size() const { return basis_.size(); }

  Jet2 jet(Vec2 p) const {
    Jet2 out;
    for (std::size_t k = 0; k < basis_.size(); ++k)
      if (coeffs_[k] != 0.0) out += primitive_jet(basis_[k], p).scaled(coeffs_[k]);
    return out;
  }
  double operator()(Vec2 p) const { return jet(p).value; }
  Vec2 gradient(Vec2 p) const { return jet(p).grad; }

  LevelFunction with_coeffs(std::vector<double> c) const {
    return LevelFunction(basis_, std::move(c), pins_);
  }
  LevelFunction with_pins(std::vector<Vec2> pins) const {
    return LevelFunction(basis_, coeffs_, std::move(pins));
  }

  /// this + a * h. Primitives of h missing from this basis are appended.
  LevelFunction plus(double a, const LevelFunction& h) const {
    LevelFunction out = *this;
    for (std::size_t k = 0; k < h.basis_.size(); ++k) {
      if (h.coeffs_[k] == 0.0) continue;
      const auto it = std::find(out.basis_.begin(), out.basis_.end(), h.basis_[k]);
      if (it == out.basis_.end()) {
        out.basis_.push_back(h.basis_[k]);
        out.coeffs_.push_back(a * h.coeffs_[k]);
      } else {
        out.coeffs_[static_cast<std::size_t>(it - out.basis_.begin())] += a * h.coeffs_[k];
      }
    }
    return out;
  }

  LevelFunction scaled(double s) const {
    auto c = coeffs_;
    for (double& v : c) v *= s;
    return with_coeffs(std::move(c));
  }

  /// Unit direction along basis function k (same basis and pins).
  LevelFunction unit(std::size_t k) const {
    std::vector<double> c(coeffs_.size(), 0.0);
    c.at(k) = 1.0;
    return with_coeffs(std::move(c));
  }

  bool is_zero() const {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
  }

 private:
  std::vector<Primitive> basis_;
  std::vector<double> coeffs_;
  std::vector<Vec2> pins_;
};

// ---------------------------------------------------------------------------
// Pins.

/// Minimal coefficient-norm correction making the function vanish at `points`.
inline LevelFunction project_to_points(const LevelFunction& g, std::span<const Vec2> points) {
  if (points.empty()) return g;
  const auto m = static_cast<Eigen::Index>(points.size());
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd phi(m, n);
  Eigen::VectorXd r(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < n; ++k)
      phi(i, k) = primitive_jet(g.basis()[static_cast<std::size_t>(k)],
                                points[static_cast<std::size_t>(i)])
                      .value;
    r[i] = g(points[static_cast<std::size_t>(i)]);
  }
  if (r.cwiseAbs().maxCoeff() == 0.0) return g;
  Eigen::MatrixXd gram = phi * phi.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() < m) throw RankDeficient("pin constraints are rank deficient for this basis");
  const Eigen::VectorXd y = qr.solve(r);
  const Eigen::VectorXd delta = -phi.transpose() * y;
  auto c = g.coeffs();
  for (Eigen::Index k = 0; k < n; ++k) c[static_cast<std::size_t>(k)] += delta[k];
  return g.with_coeffs(std::move(c));
}

inline LevelFunction project_pinned(const LevelFunction& g) {
  return project_to_points(g, g.pins());
}

// ---------------------------------------------------------------------------
// Zero set.

/// Newton projection onto {g = 0} along the gradient.
struct ProjectedPoint {
  Vec2 point;
  double residual = 0.0;   // |g(point)|
  double grad_norm = 0.0;  // |grad g(point)|
  bool converged = false;
};

inline ProjectedPoint newton_project(const LevelFunction& g, Vec2 x, double tol = 1e-12,
                                     int max_iter = 50) {
  ProjectedPoint out;
  for (int it = 0; it <= max_iter; ++it) {
    const Jet2 j = g.jet(x);
    out.point = x;
    out.residual = std::abs(j.value);
    out.grad_norm = norm(j.grad);
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    const double gg = dot(j.grad, j.grad);
    if (it == max_iter || gg < 1e-300) return out;
    x -= j.grad * (j.value / gg);
  }
  return out;
}

/// Points of {g = 0} found by a sign scan along grid edges plus Newton
/// refinement from nodes lying within about one cell of the zero set (the
/// latter catches zeros without a sign change, e.g. tangential minima).
inline std::vector<ProjectedPoint> zero_set_points(const LevelFunction& g, const Grid& grid) {
  std::vector<double> val(grid.size());
  std::vector<Vec2> grad(grid.size());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const Jet2 jt = g.jet(grid.node(i, j));
      val[grid.index(i, j)] = jt.value;
      grad[grid.index(i, j)] = jt.grad;
    }
  std::vector<ProjectedPoint> out;
  auto keep = [&](const ProjectedPoint& p) {
    if (p.residual <= 1e-8 && grid.contains(p.point)) out.push_back(p);
  };
  auto edge = [&](int i0, int j0, int i1, int j1) {
    const double a = val[grid.index(i0, j0)], b = val[grid.index(i1, j1)];
    if ((a < 0.0) == (b < 0.0)) return;
    Vec2 lo = grid.node(i0, j0), hi = grid.node(i1, j1);
    double flo = a;
    for (int it = 0; it < 60; ++it) {
      const Vec2 mid = (lo + hi) * 0.5;
      const double fm = g(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    keep(newton_project(g, (lo + hi) * 0.5));
  };
  const double hmax = std::max(grid.hx(), grid.hy());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (i + 1 < grid.nx) edge(i, j, i + 1, j);
      if (j + 1 < grid.ny) edge(i, j, i, j + 1);
      const std::size_t k = grid.index(i, j);
      if (std::abs(val[k]) <= norm(grad[k]) * hmax) {
        // Only a local minimum of |g| among the 4-neighbours seeds a Newton run.
        bool is_min = true;
        const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
        for (int d = 0; d < 4 && is_min; ++d) {
          const int a = i + di[d], b = j + dj[d];
          if (a < 0 || b < 0 || a >= grid.nx || b >= grid.ny) continue;
          if (std::abs(val[grid.index(a, b)]) < std::abs(val[k])) is_min = false;
        }
        if (is_min) keep(newton_project(g, grid.node(i, j)));
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Admissibility.

struct AdmissibilityReport {
  double min_boundary_value = std::numeric_limits<double>::infinity();
  double min_grad_on_zero_set = std::numeric_limits<double>::infinity();
  std::size_t zero_set_samples = 0;
  std::vector<double> pin_values;
  bool positive_on_boundary = true;
  bool regular_zero_set = true;
  bool pins_nonpositive = true;
  bool admissible = true;

  std::string summary() const {
    std::string s = admissible ? "admissible" : "not admissible";
    if (!positive_on_boundary) s += "; g <= 0 somewhere on the boundary of D";
    if (!regular_zero_set) s += "; grad g vanishes on the zero set";
    if (!pins_nonpositive) s += "; g > 0 at a pinned point";
    s += "; min boundary g = " + std::to_string(min_boundary_value);
    s += "; min |grad g| on zero set = " + std::to_string(min_grad_on_zero_set);
    return s;
  }
};

inline constexpr double kGradMargin = 1e-6;

inline AdmissibilityReport check_admissible(const LevelFunction& g, const Grid& grid) {
  AdmissibilityReport rep;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      if (grid.on_boundary(i, j)) rep.min_boundary_value = std::min(rep.min_boundary_value, g(grid.node(i, j)));
  rep.positive_on_boundary = rep.min_boundary_value > 0.0;

  const auto pts = zero_set_points(g, grid);
  rep.zero_set_samples = pts.size();
  for (const auto& p : pts) rep.min_grad_on_zero_set = std::min(rep.min_grad_on_zero_set, p.grad_norm);
  rep.regular_zero_set = pts.empty() || rep.min_grad_on_zero_set > kGradMargin;

  for (const Vec2& p : g.pins()) {
    const double v = g(p);
    rep.pin_values.push_back(v);
    if (v > 1e-10) rep.pins_nonpositive = false;
  }
  rep.admissible = rep.positive_on_boundary && rep.regular_zero_set && rep.pins_nonpositive;
  return rep;
}

// ---------------------------------------------------------------------------
// Component census of the connected component of {g < 0} attached to an anchor.

struct BoundaryComponent {
  Vec2 seed;
  int orientation = 1;  // +1 outer boundary, -1 boundary of a hole
  std::vector<std::size_t> encloses;
  bool pinned = false;  // seed is one of the level function's pins
};

struct ComponentCensus {
  std::vector<BoundaryComponent> components;  // outer boundary first
  std::size_t holes = 0;
  std::vector<std::uint8_t> inside;  // node mask of the selected component

  std::size_t size() const { return components.size(); }
};

namespace detail {

// Labels 8-connected regions of the complement of `inside`; returns labels
// (-1 for inside nodes) and the label touching the grid boundary (or -1).
inline std::pair<std::vector<int>, int> label_complement(const Grid& grid,
                                                         const std::vector<std::uint8_t>& inside,
                                                         int& n_labels) {
  std::vector<int> label(grid.size(), -1);
  int outer = -1;
  n_labels = 0;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t k = grid.index(i, j);
      if (inside[k] || label[k] >= 0) continue;
      const int lab = n_labels++;
      std::queue<std::pair<int, int>> q;
      q.emplace(i, j);
      label[k] = lab;
      while (!q.empty()) {
        auto [a, b] = q.front();
        q.pop();
        if (grid.on_boundary(a, b) && outer < 0) outer = lab;
        for (int db = -1; db <= 1; ++db)
          for (int da = -1; da <= 1; ++da) {
            const int na = a + da, nb = b + db;
            if (na < 0 || nb < 0 || na >= grid.nx || nb >= grid.ny) continue;
            const std::size_t nk = grid.index(na, nb);
            if (inside[nk] || label[nk] >= 0) continue;
            label[nk] = lab;
            q.emplace(na, nb);
          }
      }
    }
  return {label, outer};
}

}  // namespace detail

/// Flood-fills the component of {g < 0} whose closure contains `anchor`, then
/// finds one seed on each of its boundary curves. Hints (pins first) are used
/// as seeds when they lie next to a curve; otherwise seeds come from the scan.
inline ComponentCensus extract_components(const LevelFunction& g, const Grid& grid, Vec2 anchor,
                                          std::span<const Vec2> seed_hints = {}) {
  std::vector<double> val(grid.size());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) val[grid.index(i, j)] = g(grid.node(i, j));

  // Negative node nearest to the anchor within a 4x4 node window.
  const int ia = static_cast<int>(std::floor((anchor.x - grid.x_min) / grid.hx()));
  const int ja = static_cast<int>(std::floor((anchor.y - grid.y_min) / grid.hy()));
  std::optional<std::pair<int, int>> start;
  double best = std::numeric_limits<double>::infinity();
  for (int j = ja - 1; j <= ja + 2; ++j)
    for (int i = ia - 1; i <= ia + 2; ++i) {
      if (i < 0 || j < 0 || i >= grid.nx || j >= grid.ny) continue;
      if (!(val[grid.index(i, j)] < 0.0)) continue;
      const double d = norm(grid.node(i, j) - anchor);
      if (d < best) {
        best = d;
        start = {i, j};
      }
    }
  if (!start) throw AnchorNotInClosure("no component of {g < 0} touches the anchor point");

  ComponentCensus census;
  census.inside.assign(grid.size(), 0);
  {
    std::queue<std::pair<int, int>> q;
    q.push(*start);
    census.inside[grid.index(start->first, start->second)] = 1;
    while (!q.empty()) {
      auto [a, b] = q.front();
      q.pop();
      const int da[] = {1, -1, 0, 0}, db[] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int na = a + da[d], nb = b + db[d];
        if (na < 0 || nb < 0 || na >= grid.nx || nb >= grid.ny) continue;
        const std::size_t nk = grid.index(na, nb);
        if (census.inside[nk] || !(val[nk] < 0.0)) continue;
        census.inside[nk] = 1;
        q.emplace(na, nb);
      }
    }
  }

  int n_labels = 0;
  auto [label, outer] = detail::label_complement(grid, census.inside, n_labels);

  // Zero crossings on edges between the component and each complement region.
  struct Crossing {
    Vec2 point;
    int region;
  };
  std::vector<Crossing> crossings;
  auto cross = [&](int i0, int j0, int i1, int j1) {
    const std::size_t k0 = grid.index(i0, j0), k1 = grid.index(i1, j1);
    if (census.inside[k0] == census.inside[k1]) return;
    const std::size_t kin = census.inside[k0] ? k0 : k1;
    const std::size_t kout = census.inside[k0] ? k1 : k0;
    Vec2 lo = census.inside[k0] ? grid.node(i0, j0) : grid.node(i1, j1);
    Vec2 hi = census.inside[k0] ? grid.node(i1, j1) : grid.node(i0, j0);
    (void)kin;
    for (int it = 0; it < 60; ++it) {
      const Vec2 mid = (lo + hi) * 0.5;
      if (g(mid) < 0.0)
        lo = mid;
      else
        hi = mid;
    }
    crossings.push_back({(lo + hi) * 0.5, label[kout]});
  };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      if (i + 1 < grid.nx) cross(i, j, i + 1, j);
      if (j + 1 < grid.ny) cross(i, j, i, j + 1);
    }

  std::vector<int> regions;
  for (const auto& c : crossings)
    if (std::find(regions.begin(), regions.end(), c.region) == regions.end())
      regions.push_back(c.region);
  // Outer boundary first, then holes in order of first appearance.
  std::stable_partition(regions.begin(), regions.end(), [&](int r) { return r == outer; });

  const double cell = std::max(grid.hx(), grid.hy());
  std::vector<char> hint_used(seed_hints.size(), 0);
  for (int r : regions) {
    BoundaryComponent comp;
    comp.orientation = (r == outer) ? 1 : -1;
    std::optional<Vec2> chosen;
    // A hint belongs to this curve if its nearest crossing is on this curve.
    for (std::size_t h = 0; h < seed_hints.size() && !chosen; ++h) {
      if (hint_used[h]) continue;
      double dmin = std::numeric_limits<double>::infinity();
      int rmin = -1;
      for (const auto& c : crossings) {
        const double d = norm(c.point - seed_hints[h]);
        if (d < dmin) {
          dmin = d;
          rmin = c.region;
        }
      }
      if (rmin != r || dmin > 2.0 * cell) continue;
      const auto proj = newton_project(g, seed_hints[h]);
      if (!proj.converged || norm(proj.point - seed_hints[h]) > 2.0 * cell) continue;
      hint_used[h] = 1;
      chosen = proj.point;
      for (const Vec2& p : g.pins())
        if (p.x == seed_hints[h].x && p.y == seed_hints[h].y) comp.pinned = true;
    }
    if (!chosen) {
      // Rightmost crossing of this curve, for a reproducible choice.
      const Crossing* pick = nullptr;
      for (const auto& c : crossings)
        if (c.region == r && (!pick || c.point.x > pick->point.x ||
                              (c.point.x == pick->point.x && c.point.y > pick->point.y)))
          pick = &c;
      chosen = newton_project(g, pick->point).point;
    }
    comp.seed = *chosen;
    census.components.push_back(comp);
  }
  census.holes = census.components.empty() ? 0 : census.components.size() - (outer >= 0 ? 1 : 0);
  if (!census.components.empty() && census.components.front().orientation == 1)
    for (std::size_t c = 1; c < census.components.size(); ++c)
      census.components.front().encloses.push_back(c);
  return census;
}

/// Seed hints for extract_components: pins first, then `previous` seeds.
inline std::vector<Vec2> seed_hints(const LevelFunction& g, const ComponentCensus* previous = nullptr) {
  std::vector<Vec2> hints(g.pins().begin(), g.pins().end());
  if (previous)
    for (const auto& c : previous->components)
      if (!c.pinned) hints.push_back(c.seed);
  return hints;
}

}  // namespace hamshape
