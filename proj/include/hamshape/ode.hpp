#pragma once

// Dormand-Prince 5(4) for small autonomous systems: an adaptive driver with
// Hermite dense output, and a fixed-step driver whose stages can be replayed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hamshape/core.hpp"

namespace hamshape::ode {

template <std::size_t N>
using State = std::array<double, N>;

namespace dp {
inline constexpr int stages = 7;
inline constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double a[7][6] = {
    {0, 0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
// Fifth-order weights; the seventh stage only feeds the error estimate.
inline constexpr double b[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0};
inline constexpr double e[7] = {71.0 / 57600, 0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200,
                                22.0 / 525, -1.0 / 40};
}  // namespace dp

template <std::size_t N>
State<N> axpy(const State<N>& y, double h, const State<N>& k) {
  State<N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h * k[i];
  return out;
}

/// One fifth-order step with the six stages that enter the solution.
/// `stage_states`, when given, receives the argument at which each stage was evaluated.
template <std::size_t N, class F>
State<N> fixed_step(F&& f, const State<N>& y, double h, State<N>* stage_states = nullptr) {
  std::array<State<N>, 6> k;
  for (int s = 0; s < 6; ++s) {
    State<N> arg = y;
    for (int r = 0; r < s; ++r)
      if (dp::a[s][r] != 0.0)
        for (std::size_t i = 0; i < N; ++i) arg[i] += h * dp::a[s][r] * k[r][i];
    if (stage_states) stage_states[s] = arg;
    k[s] = f(arg);
  }
  State<N> out = y;
  for (int s = 0; s < 6; ++s)
    if (dp::b[s] != 0.0)
      for (std::size_t i = 0; i < N; ++i) out[i] += h * dp::b[s] * k[s][i];
  return out;
}

template <std::size_t N>
double scaled_error(const State<N>& err, const State<N>& y0, const State<N>& y1, double tol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = tol * (1.0 + std::max(std::abs(y0[i]), std::abs(y1[i])));
    acc += (err[i] / sc) * (err[i] / sc);
  }
  return std::sqrt(acc / N);
}

/// Accepted step of the adaptive driver: endpoints and derivatives for
/// cubic Hermite interpolation inside the step.
template <std::size_t N>
struct Segment {
  double t0, t1;
  State<N> y0, y1, f0, f1;

  State<N> at(double t) const {
    const double h = t1 - t0, s = (t - t0) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    State<N> out;
    for (std::size_t i = 0; i < N; ++i)
      out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    return out;
  }
};

/// Adaptive integration that hands every accepted step to `visit`; stops when
/// `visit` returns false or after `max_steps`. Returns the number of accepted steps.
template <std::size_t N, class F, class Visit>
std::size_t integrate_adaptive(F&& f, State<N> y, double h, double tol, Visit&& visit,
                               std::size_t max_steps = 2000000, double h_min = 1e-14) {
  double t = 0.0;
  State<N> fy = f(y);
  std::size_t accepted = 0;
  while (accepted < max_steps) {
    std::array<State<N>, 7> k;
    k[0] = fy;
    for (int s = 1; s < 7; ++s) {
      State<N> arg = y;
      for (int r = 0; r < s; ++r)
        for (std::size_t i = 0; i < N; ++i) arg[i] += h * dp::a[s][r] * k[r][i];
      k[s] = f(arg);
    }
    State<N> y1 = y, err{};
    for (int s = 0; s < 7; ++s)
      for (std::size_t i = 0; i < N; ++i) {
        y1[i] += h * dp::b[s] * k[s][i];
        err[i] += h * dp::e[s] * k[s][i];
      }
    const double en = scaled_error(err, y, y1, tol);
    if (en <= 1.0) {
      Segment<N> seg{t, t + h, y, y1, fy, k[6]};
      ++accepted;
      t += h;
      y = y1;
      fy = k[6];
      if (!visit(seg)) return accepted;
    }
    const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= fac;
    if (h < h_min) throw StiffFailure("step size underflow in adaptive integration");
  }
  return accepted;
}

}  // namespace hamshape::ode
