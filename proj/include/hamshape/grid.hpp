#pragma once

// Structured grid over the hold-all rectangle D, node fields, interpolation,
// finite-difference gradients and the Dirichlet solver for -lap(y) + y = rhs.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hamshape/core.hpp"

namespace hamshape {

struct Grid {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  int nx = 3, ny = 3;

  Grid() = default;
  Grid(double x0, double x1, double y0, double y1, int nx_, int ny_)
      : x_min(x0), x_max(x1), y_min(y0), y_max(y1), nx(nx_), ny(ny_) {
    if (nx < 3 || ny < 3) throw InvalidInput("grid needs at least 3 nodes per axis");
    if (!(x1 > x0) || !(y1 > y0)) throw InvalidInput("grid extent must be positive");
  }

  double hx() const { return (x_max - x_min) / (nx - 1); }
  double hy() const { return (y_max - y_min) / (ny - 1); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  Vec2 node(int i, int j) const { return {x_min + i * hx(), y_min + j * hy()}; }
  bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == nx - 1 || j == ny - 1; }
  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  double diameter() const { return std::hypot(x_max - x_min, y_max - y_min); }

  bool operator==(const Grid& o) const {
    return x_min == o.x_min && x_max == o.x_max && y_min == o.y_min && y_max == o.y_max &&
           nx == o.nx && ny == o.ny;
  }
};

enum class Interp { bilinear, bicubic };

/// Linear functional "evaluate at a point" expressed as node weights. wx, wy
/// carry the weights of the interpolant's first derivatives.
struct PointStencil {
  int count = 0;
  std::array<std::size_t, 16> idx{};
  std::array<double, 16> w{};
  std::array<double, 16> wx{};
  std::array<double, 16> wy{};
};

namespace detail {

struct Stencil1D {
  int count = 0;
  std::array<int, 4> idx{};
  std::array<double, 4> w{};
  std::array<double, 4> dw{};  // d/dx, already divided by the spacing
};

// Keys cubic convolution (a = -1/2); C1 across cells, third-order accurate.
// Ghost nodes beyond the ends are quadratic extrapolations and get folded
// back onto the first/last three nodes.
inline Stencil1D cubic_stencil(double x, double x0, double h, int n) {
  double s = (x - x0) / h;
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 0, n - 2);
  const double t = s - i;
  const double t2 = t * t, t3 = t2 * t;
  std::array<double, 4> w = {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2),
                             0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
  std::array<double, 4> dw = {0.5 * (-3 * t2 + 4 * t - 1), 0.5 * (9 * t2 - 10 * t),
                              0.5 * (-9 * t2 + 8 * t + 1), 0.5 * (3 * t2 - 2 * t)};
  for (double& d : dw) d /= h;

  Stencil1D st;
  int base = i - 1;
  if (base < 0) {
    // f[-1] = 3 f[0] - 3 f[1] + f[2]
    st.count = 3;
    st.idx = {0, 1, 2, 0};
    st.w = {w[1] + 3 * w[0], w[2] - 3 * w[0], w[3] + w[0], 0.0};
    st.dw = {dw[1] + 3 * dw[0], dw[2] - 3 * dw[0], dw[3] + dw[0], 0.0};
    return st;
  }
  if (i + 2 > n - 1) {
    // f[n] = 3 f[n-1] - 3 f[n-2] + f[n-3]
    st.count = 3;
    st.idx = {n - 3, n - 2, n - 1, 0};
    st.w = {w[0] + w[3], w[1] - 3 * w[3], w[2] + 3 * w[3], 0.0};
    st.dw = {dw[0] + dw[3], dw[1] - 3 * dw[3], dw[2] + 3 * dw[3], 0.0};
    return st;
  }
  st.count = 4;
  st.idx = {base, base + 1, base + 2, base + 3};
  st.w = w;
  st.dw = dw;
  return st;
}

inline Stencil1D linear_stencil(double x, double x0, double h, int n) {
  double s = (x - x0) / h;
  int i = std::clamp(static_cast<int>(std::floor(s)), 0, n - 2);
  const double t = s - i;
  Stencil1D st;
  st.count = 2;
  st.idx = {i, i + 1, 0, 0};
  st.w = {1.0 - t, t, 0.0, 0.0};
  st.dw = {-1.0 / h, 1.0 / h, 0.0, 0.0};
  return st;
}

}  // namespace detail

inline PointStencil point_stencil(const Grid& grid, Vec2 p, Interp order = Interp::bicubic) {
  const double px = std::clamp(p.x, grid.x_min, grid.x_max);
  const double py = std::clamp(p.y, grid.y_min, grid.y_max);
  const auto sx = order == Interp::bicubic
                      ? detail::cubic_stencil(px, grid.x_min, grid.hx(), grid.nx)
                      : detail::linear_stencil(px, grid.x_min, grid.hx(), grid.nx);
  const auto sy = order == Interp::bicubic
                      ? detail::cubic_stencil(py, grid.y_min, grid.hy(), grid.ny)
                      : detail::linear_stencil(py, grid.y_min, grid.hy(), grid.ny);
  PointStencil st;
  for (int b = 0; b < sy.count; ++b) {
    for (int a = 0; a < sx.count; ++a) {
      const int k = st.count++;
      st.idx[k] = grid.index(sx.idx[a], sy.idx[b]);
      st.w[k] = sx.w[a] * sy.w[b];
      st.wx[k] = sx.dw[a] * sy.w[b];
      st.wy[k] = sx.w[a] * sy.dw[b];
    }
  }
  return st;
}

/// Grid-sampled function on D.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double fill = 0.0, Interp order = Interp::bicubic)
      : grid_(grid), values_(grid.size(), fill), order_(order) {}
  ScalarField(const Grid& grid, std::vector<double> values, Interp order = Interp::bicubic)
      : grid_(grid), values_(std::move(values)), order_(order) {
    if (values_.size() != grid_.size()) throw InvalidInput("field size does not match grid");
  }

  template <class F>
  static ScalarField sample(const Grid& grid, F&& f, Interp order = Interp::bicubic) {
    ScalarField out(grid, 0.0, order);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) out.at(i, j) = f(grid.node(i, j));
    return out;
  }

  const Grid& grid() const { return grid_; }
  Interp interp_order() const { return order_; }
  void set_interp_order(Interp order) { order_ = order; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double& at(int i, int j) { return values_[grid_.index(i, j)]; }
  double at(int i, int j) const { return values_[grid_.index(i, j)]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  double eval(Vec2 p) const {
    const auto st = point_stencil(grid_, p, order_);
    double v = 0.0;
    for (int k = 0; k < st.count; ++k) v += st.w[k] * values_[st.idx[k]];
    return v;
  }

  /// Value and gradient of the interpolant.
  std::pair<double, Vec2> eval_with_gradient(Vec2 p) const {
    const auto st = point_stencil(grid_, p, order_);
    double v = 0.0;
    Vec2 g;
    for (int k = 0; k < st.count; ++k) {
      const double f = values_[st.idx[k]];
      v += st.w[k] * f;
      g.x += st.wx[k] * f;
      g.y += st.wy[k] * f;
    }
    return {v, g};
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  ScalarField& axpy(double a, const ScalarField& x) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * x.values_[k];
    return *this;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
  Interp order_ = Interp::bicubic;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }

/// Discrete L2(D) pairing: sum over nodes times hx*hy.
inline double l2_pairing(const ScalarField& a, const ScalarField& b) {
  const auto& g = a.grid();
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) s += a[k] * b[k];
  return s * g.hx() * g.hy();
}

// ---------------------------------------------------------------------------
// Finite-difference gradient. Central differences inside, second-order
// one-sided differences on the boundary rows/columns.

inline std::pair<ScalarField, ScalarField> gradient_field(const ScalarField& f) {
  const Grid& g = f.grid();
  ScalarField dx(g, 0.0, f.interp_order()), dy(g, 0.0, f.interp_order());
  const double ihx = 1.0 / (2.0 * g.hx()), ihy = 1.0 / (2.0 * g.hy());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i == 0)
        dx.at(i, j) = (-3 * f.at(0, j) + 4 * f.at(1, j) - f.at(2, j)) * ihx;
      else if (i == g.nx - 1)
        dx.at(i, j) = (3 * f.at(i, j) - 4 * f.at(i - 1, j) + f.at(i - 2, j)) * ihx;
      else
        dx.at(i, j) = (f.at(i + 1, j) - f.at(i - 1, j)) * ihx;

      if (j == 0)
        dy.at(i, j) = (-3 * f.at(i, 0) + 4 * f.at(i, 1) - f.at(i, 2)) * ihy;
      else if (j == g.ny - 1)
        dy.at(i, j) = (3 * f.at(i, j) - 4 * f.at(i, j - 1) + f.at(i, j - 2)) * ihy;
      else
        dy.at(i, j) = (f.at(i, j + 1) - f.at(i, j - 1)) * ihy;
    }
  }
  return {std::move(dx), std::move(dy)};
}

/// Adjoint of gradient_field: returns node weights W with
/// sum(gx * D1 f) + sum(gy * D2 f) == sum(W * f) for every f.
inline std::vector<double> gradient_transpose(const Grid& g, std::span<const double> gx,
                                              std::span<const double> gy) {
  std::vector<double> w(g.size(), 0.0);
  const double ihx = 1.0 / (2.0 * g.hx()), ihy = 1.0 / (2.0 * g.hy());
  auto add = [&](int i, int j, double v) { w[g.index(i, j)] += v; };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double cx = gx[g.index(i, j)] * ihx;
      if (cx != 0.0) {
        if (i == 0) {
          add(0, j, -3 * cx);
          add(1, j, 4 * cx);
          add(2, j, -cx);
        } else if (i == g.nx - 1) {
          add(i, j, 3 * cx);
          add(i - 1, j, -4 * cx);
          add(i - 2, j, cx);
        } else {
          add(i + 1, j, cx);
          add(i - 1, j, -cx);
        }
      }
      const double cy = gy[g.index(i, j)] * ihy;
      if (cy != 0.0) {
        if (j == 0) {
          add(i, 0, -3 * cy);
          add(i, 1, 4 * cy);
          add(i, 2, -cy);
        } else if (j == g.ny - 1) {
          add(i, j, 3 * cy);
          add(i, j - 1, -4 * cy);
          add(i, j - 2, cy);
        } else {
          add(i, j + 1, cy);
          add(i, j - 1, -cy);
        }
      }
    }
  }
  return w;
}

/// Interpolated gradient field (both components) with its Jacobian.
/// jac(r, c) = d/dx_c of the interpolant of component r.
struct GradientSample {
  Vec2 value;
  Mat2 jac;
};

class GradientInterpolant {
 public:
  GradientInterpolant() = default;
  explicit GradientInterpolant(const ScalarField& f) {
    auto [dx, dy] = gradient_field(f);
    dx_ = std::move(dx);
    dy_ = std::move(dy);
  }
  GradientInterpolant(ScalarField dx, ScalarField dy) : dx_(std::move(dx)), dy_(std::move(dy)) {}

  GradientSample operator()(Vec2 p) const {
    const auto st = point_stencil(dx_.grid(), p, dx_.interp_order());
    GradientSample s;
    for (int k = 0; k < st.count; ++k) {
      const double a = dx_[st.idx[k]], b = dy_[st.idx[k]];
      s.value.x += st.w[k] * a;
      s.value.y += st.w[k] * b;
      s.jac.a11 += st.wx[k] * a;
      s.jac.a12 += st.wy[k] * a;
      s.jac.a21 += st.wx[k] * b;
      s.jac.a22 += st.wy[k] * b;
    }
    return s;
  }

  const ScalarField& dx() const { return dx_; }
  const ScalarField& dy() const { return dy_; }

 private:
  ScalarField dx_, dy_;
};

// ---------------------------------------------------------------------------
// The operator A: solves -lap_h y + y = rhs with y = 0 on the boundary of D.
// The 5-point matrix on interior nodes is factorized once (sparse LDL^T).

class DirichletOperator {
 public:
  explicit DirichletOperator(const Grid& grid) : grid_(grid) {
    const int mx = grid.nx - 2, my = grid.ny - 2;
    const int n = mx * my;
    const double cx = 1.0 / (grid.hx() * grid.hx()), cy = 1.0 / (grid.hy() * grid.hy());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 5);
    for (int j = 0; j < my; ++j) {
      for (int i = 0; i < mx; ++i) {
        const int r = j * mx + i;
        trip.emplace_back(r, r, 2 * cx + 2 * cy + 1.0);
        if (i > 0) trip.emplace_back(r, r - 1, -cx);
        if (i < mx - 1) trip.emplace_back(r, r + 1, -cx);
        if (j > 0) trip.emplace_back(r, r - mx, -cy);
        if (j < my - 1) trip.emplace_back(r, r + mx, -cy);
      }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    solver_.compute(matrix_);
    if (solver_.info() != Eigen::Success) throw SolverFailure("factorization failed", INFINITY);
  }

  const Grid& grid() const { return grid_; }

  /// Solves with the interior values of rhs; boundary values of rhs are ignored.
  ScalarField solve(const ScalarField& rhs) const {
    const int mx = grid_.nx - 2, my = grid_.ny - 2;
    Eigen::VectorXd b(mx * my);
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) b[j * mx + i] = rhs.at(i + 1, j + 1);
    ScalarField out(grid_, 0.0, rhs.interp_order());
    const double bnorm = b.norm();
    if (bnorm == 0.0) return out;
    Eigen::VectorXd y = solver_.solve(b);
    const double rel = (matrix_ * y - b).norm() / bnorm;
    if (!(rel <= tolerance)) throw SolverFailure("Dirichlet solve did not converge", rel);
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < mx; ++i) out.at(i + 1, j + 1) = y[j * mx + i];
    return out;
  }

  /// (-lap_h y + y) at interior nodes, zero on the boundary rows.
  ScalarField apply(const ScalarField& y) const {
    const double cx = 1.0 / (grid_.hx() * grid_.hx()), cy = 1.0 / (grid_.hy() * grid_.hy());
    ScalarField out(grid_, 0.0, y.interp_order());
    for (int j = 1; j < grid_.ny - 1; ++j)
      for (int i = 1; i < grid_.nx - 1; ++i)
        out.at(i, j) = (2 * cx + 2 * cy + 1.0) * y.at(i, j) -
                       cx * (y.at(i - 1, j) + y.at(i + 1, j)) -
                       cy * (y.at(i, j - 1) + y.at(i, j + 1));
    return out;
  }

  static constexpr double tolerance = 1e-10;

 private:
  Grid grid_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

inline ScalarField solve_dirichlet(const Grid& grid, const ScalarField& rhs) {
  return DirichletOperator(grid).solve(rhs);
}

// ---------------------------------------------------------------------------
// Very weak (transposition) solutions sourced by curve measures.

/// Boundary measure on a sampled curve: the functional
///   q -> sum_i weight_i * (value_density_i * q(point_i) + flux_density_i . grad q(point_i))
/// where grad q is the interpolated finite-difference gradient. Either density
/// vector may be empty (treated as zero).
struct CurveSource {
  std::vector<Vec2> points;
  std::vector<double> weights;
  std::vector<double> value_density;
  std::vector<Vec2> flux_density;
};

/// Node weights c with curve_functional(q) == sum_k c_k q_k.
inline std::vector<double> deposit_curve_sources(const Grid& grid,
                                                 std::span<const CurveSource> sources,
                                                 Interp order = Interp::bicubic) {
  std::vector<double> c(grid.size(), 0.0), gx(grid.size(), 0.0), gy(grid.size(), 0.0);
  bool any_flux = false;
  for (const auto& src : sources) {
    for (std::size_t s = 0; s < src.points.size(); ++s) {
      const double wt = src.weights[s];
      const double vd = src.value_density.empty() ? 0.0 : src.value_density[s];
      const Vec2 fd = src.flux_density.empty() ? Vec2{} : src.flux_density[s];
      if (vd == 0.0 && fd.x == 0.0 && fd.y == 0.0) continue;
      const auto st = point_stencil(grid, src.points[s], order);
      for (int k = 0; k < st.count; ++k) {
        c[st.idx[k]] += wt * vd * st.w[k];
        gx[st.idx[k]] += wt * fd.x * st.w[k];
        gy[st.idx[k]] += wt * fd.y * st.w[k];
      }
      any_flux = any_flux || fd.x != 0.0 || fd.y != 0.0;
    }
  }
  if (any_flux) {
    const auto w = gradient_transpose(grid, gx, gy);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += w[k];
  }
  return c;
}

/// Direct evaluation of the curve functional on a field.
inline double curve_functional(std::span<const CurveSource> sources, const ScalarField& q) {
  const GradientInterpolant grad(q);
  double total = 0.0;
  for (const auto& src : sources) {
    for (std::size_t s = 0; s < src.points.size(); ++s) {
      const double vd = src.value_density.empty() ? 0.0 : src.value_density[s];
      const Vec2 fd = src.flux_density.empty() ? Vec2{} : src.flux_density[s];
      double term = 0.0;
      if (vd != 0.0) term += vd * q.eval(src.points[s]);
      if (fd.x != 0.0 || fd.y != 0.0) term += dot(fd, grad(src.points[s]).value);
      total += src.weights[s] * term;
    }
  }
  return total;
}

/// p with sum_nodes p * (-lap_h q + q) * hx * hy == curve_functional(q) for
/// every grid field q vanishing on the boundary of D.
inline ScalarField solve_adjoint_transposition(const DirichletOperator& op,
                                               std::span<const CurveSource> sources) {
  const Grid& g = op.grid();
  auto c = deposit_curve_sources(g, sources);
  const double inv_cell = 1.0 / (g.hx() * g.hy());
  for (double& v : c) v *= inv_cell;
  // The 5-point operator is symmetric, so the transposed solve is the same solve.
  return op.solve(ScalarField(g, std::move(c)));
}

inline ScalarField solve_adjoint_transposition(const Grid& grid,
                                               std::span<const CurveSource> sources) {
  return solve_adjoint_transposition(DirichletOperator(grid), sources);
}

// ---------------------------------------------------------------------------
// CSV: one header row "nx,ny,x_min,x_max,y_min,y_max" with the values, then
// nx*ny rows "i,j,value" with i outer and j inner.

inline void write_field_csv(std::ostream& os, const ScalarField& f) {
  const Grid& g = f.grid();
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", g.nx, g.ny, g.x_min, g.x_max,
                g.y_min, g.y_max);
  os << buf;
  for (int i = 0; i < g.nx; ++i) {
    for (int j = 0; j < g.ny; ++j) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", i, j, f.at(i, j));
      os << buf;
    }
  }
}

inline ScalarField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("empty field csv");
  for (char& ch : line)
    if (ch == ',') ch = ' ';
  std::istringstream hs(line);
  int nx = 0, ny = 0;
  double x0, x1, y0, y1;
  if (!(hs >> nx >> ny >> x0 >> x1 >> y0 >> y1)) throw InvalidInput("bad field csv header");
  ScalarField f(Grid(x0, x1, y0, y1, nx, ny));
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    int i, j;
    double v;
    if (!(ls >> i >> j >> v) || i < 0 || j < 0 || i >= nx || j >= ny)
      throw InvalidInput("bad field csv row: " + line);
    f.at(i, j) = v;
    ++rows;
  }
  if (rows != f.grid().size()) throw InvalidInput("field csv row count mismatch");
  return f;
}

}  // namespace hamshape
