#pragma once

#include <array>
#include <functional>
#include <vector>

#include "rnls/field.hpp"

namespace rnls {

/// Fourier coefficients of v (unnormalized forward DFT).
Field to_spectral(const Field& v);
/// Physical samples from Fourier coefficients.
Field from_spectral(const Field& vhat);

/// Multiplies the spectrum of v by symbol(idx) and transforms back.
/// `idx` indexes the flattened spectral array; use Grid::wavevector(idx).
Field apply_symbol(const Field& v, const std::function<cplx(std::size_t)>& symbol);

Field laplacian(const Field& v);
/// Inverse Laplacian on the mean-zero subspace (the k = 0 mode is dropped).
Field inverse_laplacian(const Field& v);
/// (1 - Delta)^{-1} v.
Field inverse_helmholtz(const Field& v);
Field partial(const Field& v, int axis);
/// Second derivative d_a d_b; the diagonal keeps the Nyquist mode.
Field partial2(const Field& v, int axis_a, int axis_b);
std::vector<Field> gradient(const Field& v);

/// <v, w> = dx^d * sum v conj(w).
cplx inner(const Field& v, const Field& w);
/// Real inner product Re<v, w>.
double inner_re(const Field& v, const Field& w);
double norm_l2(const Field& v);
double norm_l2_spectral(const Field& v);
/// ||grad v||_2.
double gradient_norm(const Field& v);
/// ||v||_{H^1}^2 = ||v||^2 + ||grad v||^2.
double h1_norm_squared(const Field& v);
/// Integral of a real density sampled on the grid.
double integrate(const Grid& grid, const std::vector<double>& density);

/// Mass int |u|^2.
double mass(const Field& u);
/// Energy 1/2 int |grad u|^2 - d/(2d+4) int |u|^{2+4/d}.
double energy(const Field& u);
/// Momentum Im int grad u conj(u); the second entry is zero for d = 1.
std::array<double, 2> momentum(const Field& u);
/// int |u|^{2+4/d}.
double potential_integral(const Field& u);

/// Sharp Gagliardo-Nirenberg check (1 - (||u||/||Q||)^{4/d}) ||grad u||^2 <= 2 E(u).
/// `tol` is relative to 1 + ||grad u||^2.
struct GnReport {
  double left = 0.0;
  double right = 0.0;
  bool satisfied = false;
  double margin() const { return right - left; }
};
GnReport gn_threshold_check(const Field& u, double q_mass, double tol = 1e-10);

}  // namespace rnls
