#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "rnls/grid.hpp"

namespace rnls {

using cplx = std::complex<double>;

/// Complex samples of a function on a Grid, row-major with axis 0 slowest.
///
/// Fields are values: copies are deep, arithmetic returns new fields, and
/// binary operations require both operands to live on equal grids.
class Field {
 public:
  Field() = default;
  explicit Field(GridPtr grid);
  Field(GridPtr grid, std::vector<cplx> values);

  /// Samples f(x, y) (y = 0 when d = 1), or f(x) for one-argument callables on 1-d grids.
  template <class F>
  static Field sample(GridPtr grid, F&& f) {
    Field out(grid);
    for (std::size_t idx = 0; idx < out.size(); ++idx) {
      auto p = grid->point(idx);
      if constexpr (std::is_invocable_v<F, double, double>) {
        out.values_[idx] = cplx(f(p[0], p[1]));
      } else {
        out.values_[idx] = cplx(f(p[0]));
      }
    }
    return out;
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }

  /// Value at the grid origin (axis indices n/2).
  cplx at_origin() const;

  bool all_finite() const;
  bool same_grid(const Field& other) const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(cplx s);
  Field& operator*=(const Field& other);

  Field conj() const;
  Field real_part() const;
  Field imag_part() const;
  /// Pointwise |v|.
  std::vector<double> abs() const;
  double max_abs() const;

 private:
  GridPtr grid_;
  std::vector<cplx> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(Field a, const Field& b);
Field operator*(Field a, cplx s);
Field operator*(cplx s, Field a);

/// Throws "incompatible grids" unless a and b share a grid.
void require_same_grid(const Field& a, const Field& b);

}  // namespace rnls
