#pragma once

// Independent oracle for the 2-d ground state: shoots the radial ODE
//   q'' + q'/r - q + q^3 = 0,  q'(0) = 0,
// bisecting on q(0) between "crosses zero" and "turns upward", then
// integrates the mass 2*pi * int q^2 r dr. Shares no code with the library.

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

struct ShootingResult {
  double q0 = 0.0;
  double mass = 0.0;
  double r_stop = 0.0;
};

namespace detail {

struct State {
  double q, p;
};

inline State rhs(double r, State s) { return {s.p, -s.p / r + s.q - s.q * s.q * s.q}; }

inline State rk4(double r, State s, double h) {
  auto add = [](State a, State b, double c) { return State{a.q + c * b.q, a.p + c * b.p}; };
  State k1 = rhs(r, s);
  State k2 = rhs(r + h / 2, add(s, k1, h / 2));
  State k3 = rhs(r + h / 2, add(s, k2, h / 2));
  State k4 = rhs(r + h, add(s, k3, h));
  return {s.q + h / 6 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q), s.p + h / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p)};
}

// +1: turned upward (q0 too small), -1: crossed zero (q0 too large).
inline int fate(double q0, double h, double r_max, double* r_event) {
  double r = h;
  double c = (q0 - q0 * q0 * q0) / 4.0;
  State s{q0 + c * h * h, 2 * c * h};
  while (r < r_max) {
    s = rk4(r, s, h);
    r += h;
    if (s.q < 0) {
      *r_event = r;
      return -1;
    }
    if (s.p > 0) {
      *r_event = r;
      return +1;
    }
  }
  *r_event = r_max;
  return 0;
}

}  // namespace detail

inline ShootingResult shoot_ground_state_2d(double h = 1e-3) {
  double lo = 2.0, hi = 2.5, r_event = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    double mid = 0.5 * (lo + hi);
    int f = detail::fate(mid, h, 60.0, &r_event);
    if (f < 0) hi = mid; else lo = mid;
  }
  ShootingResult out;
  out.q0 = 0.5 * (lo + hi);
  detail::fate(out.q0, h, 60.0, &r_event);
  out.r_stop = std::min(r_event - 4.0, 25.0);

  // Simpson on pairs of RK4 steps; the first interval [0, h] uses the series.
  const double q0 = out.q0;
  const double c = (q0 - q0 * q0 * q0) / 4.0;
  auto integrand_series = [&](double r) {
    double q = q0 + c * r * r;
    return q * q * r;
  };
  double integral = h / 6 * (integrand_series(0) + 4 * integrand_series(h / 2) + integrand_series(h));
  double r = h;
  detail::State s{q0 + c * h * h, 2 * c * h};
  while (r + 2 * h <= out.r_stop) {
    double f0 = s.q * s.q * r;
    s = detail::rk4(r, s, h);
    double f1 = s.q * s.q * (r + h);
    s = detail::rk4(r + h, s, h);
    double f2 = s.q * s.q * (r + 2 * h);
    integral += h / 3 * (f0 + 4 * f1 + f2);
    r += 2 * h;
  }
  out.mass = 2 * std::numbers::pi * integral;
  return out;
}

/// Closed-form 1-d ground state 3^{1/4} sech^{1/2}(2x).
inline double ground_state_1d(double x) { return std::pow(3.0, 0.25) / std::sqrt(std::cosh(2.0 * x)); }

}  // namespace oracle
