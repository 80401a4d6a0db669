#include "rnls/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rnls/error.hpp"

namespace rnls {

Grid::Grid(int dim, int n, double half_length)
    : dim_(dim), n_(n), half_length_(half_length), dx_(2.0 * half_length / n) {
  if (dim != 1 && dim != 2) throw Error("grid dimension must be 1 or 2, got " + std::to_string(dim));
  if (n < 16 || (n & (n - 1)) != 0) throw Error("grid size must be a power of two >= 16, got " + std::to_string(n));
  if (!(half_length > 0.0) || !std::isfinite(half_length)) throw Error("grid half-length must be positive");
  k_.resize(n);
  const double dk = std::numbers::pi / half_length;
  for (int m = 0; m < n; ++m) k_[m] = dk * (m < n / 2 ? m : m - n);
}

std::array<int, 2> Grid::axis_indices(std::size_t idx) const {
  if (dim_ == 1) return {int(idx), 0};
  return {int(idx / n_), int(idx % n_)};
}

std::array<double, 2> Grid::point(std::size_t idx) const {
  auto [i, j] = axis_indices(idx);
  return {coord(i), dim_ == 1 ? 0.0 : coord(j)};
}

std::array<double, 2> Grid::wavevector(std::size_t idx) const {
  auto [i, j] = axis_indices(idx);
  return {k_[i], dim_ == 1 ? 0.0 : k_[j]};
}

double Grid::k_squared(std::size_t idx) const {
  auto k = wavevector(idx);
  return k[0] * k[0] + k[1] * k[1];
}

}  // namespace rnls
