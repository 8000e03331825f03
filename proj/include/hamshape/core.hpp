#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hamshape {

/// Point or vector in the plane.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr double operator[](int i) const { return i == 0 ? x : y; }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
/// Rotation by +90 degrees: (a, b) -> (-b, a).
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Symmetric or general 2x2 matrix, row-major.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  constexpr Vec2 operator*(Vec2 v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  constexpr Mat2 transposed() const { return {a11, a21, a12, a22}; }
  constexpr Mat2 operator+(const Mat2& o) const {
    return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
  }
  constexpr Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }
};

/// Value, gradient and Hessian of a scalar function at one point.
struct Jet2 {
  double value = 0.0;
  Vec2 grad;
  Mat2 hess;

  Jet2& operator+=(const Jet2& o) {
    value += o.value;
    grad += o.grad;
    hess = hess + o.hess;
    return *this;
  }
  Jet2 scaled(double s) const { return {value * s, grad * s, hess * s}; }
};

// ---------------------------------------------------------------------------
// Errors. Everything the library throws derives from hamshape::Error.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve did not reach the requested residual.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double residual)
      : Error(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Input violates a documented precondition (seed off the curve, bad shapes...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class AnchorNotInClosure : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Orbit did not close within the arc-length budget.
class NoReturn : public Error {
 public:
  using Error::Error;
};

/// Adaptive step size underflowed.
class StiffFailure : public Error {
 public:
  using Error::Error;
};

class DegenerateTrace : public Error {
 public:
  using Error::Error;
};

class NeumannIncompatible : public Error {
 public:
  using Error::Error;
};

class NoDecrease : public Error {
 public:
  using Error::Error;
};

}  // namespace hamshape
