#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace rnls {

/// Uniform periodic lattice on [-L, L)^dim, dim in {1, 2}.
///
/// Sample i on an axis sits at x_i = -L + i*dx, so the origin is index n/2.
/// Wavenumbers use the standard DFT ordering k_m = (pi/L)*m for
/// m = 0..n/2-1, -n/2..-1. The Nyquist mode m = -n/2 is kept for even-order
/// operators (the Laplacian) and dropped for odd-order ones (first
/// derivatives), so that derivatives of real fields stay real.
class Grid {
 public:
  Grid(int dim, int n, double half_length);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double half_length() const { return half_length_; }
  double dx() const { return dx_; }
  double cell_volume() const { return dim_ == 1 ? dx_ : dx_ * dx_; }
  std::size_t size() const { return dim_ == 1 ? std::size_t(n_) : std::size_t(n_) * n_; }

  double coord(int i) const { return -half_length_ + i * dx_; }
  /// Axis index of the sample closest to -x (periodic reflection).
  int mirror(int i) const { return (n_ - i) % n_; }
  int origin_index() const { return n_ / 2; }

  /// Physical coordinates of flattened sample `idx` (row-major, axis 0 slowest).
  std::array<double, 2> point(std::size_t idx) const;
  std::array<int, 2> axis_indices(std::size_t idx) const;
  std::size_t flat(int i0, int i1 = 0) const { return dim_ == 1 ? std::size_t(i0) : std::size_t(i0) * n_ + i1; }

  const std::vector<double>& wavenumbers() const { return k_; }
  /// Wavenumber for first derivatives: zero at Nyquist.
  double k_odd(int m) const { return m == n_ / 2 ? 0.0 : k_[m]; }
  std::array<double, 2> wavevector(std::size_t idx) const;
  double k_squared(std::size_t idx) const;

  bool operator==(const Grid& other) const {
    return dim_ == other.dim_ && n_ == other.n_ && half_length_ == other.half_length_;
  }

 private:
  int dim_;
  int n_;
  double half_length_;
  double dx_;
  std::vector<double> k_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, int n, double half_length) {
  return std::make_shared<const Grid>(dim, n, half_length);
}

}  // namespace rnls
