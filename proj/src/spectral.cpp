#include "rnls/spectral.hpp"

#include <cmath>

#include "rnls/error.hpp"
#include "rnls/fft.hpp"

namespace rnls {

Field to_spectral(const Field& v) {
  Field out(v.grid_ptr());
  fft::forward(v.grid(), v.values(), out.values());
  return out;
}

Field from_spectral(const Field& vhat) {
  Field out(vhat.grid_ptr());
  fft::inverse(vhat.grid(), vhat.values(), out.values());
  return out;
}

Field apply_symbol(const Field& v, const std::function<cplx(std::size_t)>& symbol) {
  Field hat = to_spectral(v);
  for (std::size_t idx = 0; idx < hat.size(); ++idx) hat[idx] *= symbol(idx);
  return from_spectral(hat);
}

Field laplacian(const Field& v) {
  const Grid& g = v.grid();
  return apply_symbol(v, [&g](std::size_t idx) { return cplx(-g.k_squared(idx)); });
}

Field inverse_laplacian(const Field& v) {
  const Grid& g = v.grid();
  return apply_symbol(v, [&g](std::size_t idx) {
    double k2 = g.k_squared(idx);
    return k2 == 0.0 ? cplx(0.0) : cplx(-1.0 / k2);
  });
}

Field inverse_helmholtz(const Field& v) {
  const Grid& g = v.grid();
  return apply_symbol(v, [&g](std::size_t idx) { return cplx(1.0 / (1.0 + g.k_squared(idx))); });
}

Field partial(const Field& v, int axis) {
  const Grid& g = v.grid();
  if (axis < 0 || axis >= g.dim()) throw Error("derivative axis out of range");
  return apply_symbol(v, [&g, axis](std::size_t idx) {
    int m = g.axis_indices(idx)[axis];
    return cplx(0.0, g.k_odd(m));
  });
}

Field partial2(const Field& v, int axis_a, int axis_b) {
  const Grid& g = v.grid();
  if (axis_a < 0 || axis_a >= g.dim() || axis_b < 0 || axis_b >= g.dim())
    throw Error("derivative axis out of range");
  return apply_symbol(v, [&g, axis_a, axis_b](std::size_t idx) {
    auto m = g.axis_indices(idx);
    if (axis_a == axis_b) {
      double k = g.wavenumbers()[m[axis_a]];
      return cplx(-k * k);
    }
    return cplx(-g.k_odd(m[axis_a]) * g.k_odd(m[axis_b]));
  });
}

std::vector<Field> gradient(const Field& v) {
  const Grid& g = v.grid();
  Field hat = to_spectral(v);
  std::vector<Field> out;
  for (int axis = 0; axis < g.dim(); ++axis) {
    Field d = hat;
    for (std::size_t idx = 0; idx < d.size(); ++idx) d[idx] *= cplx(0.0, g.k_odd(g.axis_indices(idx)[axis]));
    out.push_back(from_spectral(d));
  }
  return out;
}

cplx inner(const Field& v, const Field& w) {
  require_same_grid(v, w);
  cplx s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * std::conj(w[i]);
  return s * v.grid().cell_volume();
}

double inner_re(const Field& v, const Field& w) {
  require_same_grid(v, w);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i].real() * w[i].real() + v[i].imag() * w[i].imag();
  return s * v.grid().cell_volume();
}

double norm_l2(const Field& v) {
  double s = 0.0;
  for (const auto& z : v.values()) s += std::norm(z);
  return std::sqrt(s * v.grid().cell_volume());
}

double norm_l2_spectral(const Field& v) {
  Field hat = to_spectral(v);
  double s = 0.0;
  for (const auto& z : hat.values()) s += std::norm(z);
  // Parseval: sum |v|^2 = sum |vhat|^2 / n^d.
  return std::sqrt(s / double(v.size()) * v.grid().cell_volume());
}

double gradient_norm(const Field& v) {
  double s = 0.0;
  for (const auto& d : gradient(v)) {
    double n = norm_l2(d);
    s += n * n;
  }
  return std::sqrt(s);
}

double h1_norm_squared(const Field& v) {
  double n0 = norm_l2(v);
  double n1 = gradient_norm(v);
  return n0 * n0 + n1 * n1;
}

double integrate(const Grid& grid, const std::vector<double>& density) {
  double s = 0.0;
  for (double v : density) s += v;
  return s * grid.cell_volume();
}

double mass(const Field& u) {
  double n = norm_l2(u);
  return n * n;
}

double potential_integral(const Field& u) {
  const double p = 2.0 + 4.0 / u.grid().dim();
  double s = 0.0;
  for (const auto& z : u.values()) s += std::pow(std::abs(z), p);
  return s * u.grid().cell_volume();
}

double energy(const Field& u) {
  const int d = u.grid().dim();
  double g = gradient_norm(u);
  return 0.5 * g * g - double(d) / (2.0 * d + 4.0) * potential_integral(u);
}

std::array<double, 2> momentum(const Field& u) {
  std::array<double, 2> out{0.0, 0.0};
  auto grad = gradient(u);
  for (int axis = 0; axis < u.grid().dim(); ++axis) out[axis] = inner(grad[axis], u).imag();
  return out;
}

GnReport gn_threshold_check(const Field& u, double q_mass, double tol) {
  if (!(q_mass > 0.0)) throw Error("ground-state mass must be positive");
  const int d = u.grid().dim();
  GnReport r;
  double ratio = mass(u) / q_mass;  // (||u||/||Q||)^2
  double g = gradient_norm(u);
  r.left = (1.0 - std::pow(ratio, 2.0 / d)) * g * g;
  r.right = 2.0 * energy(u);
  r.satisfied = r.left <= r.right + tol * (1.0 + g * g);
  return r;
}

}  // namespace rnls
