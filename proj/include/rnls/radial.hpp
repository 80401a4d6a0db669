#pragma once

#include <vector>

#include "rnls/field.hpp"

namespace rnls {

/// Off-grid evaluator for a real radial field f(x) = q(|x|).
///
/// The axis slice through the origin is refined by zero-padding its DFT
/// (exact trigonometric interpolation), tabulated on [0, L], and read back
/// with 8-point Lagrange interpolation. Outside the box q is taken as 0.
class RadialProfile {
 public:
  RadialProfile() = default;
  static RadialProfile from_field(const Field& f, int refine = 16);

  double value(double r) const;
  double derivative(double r) const;
  double max_radius() const { return h_ * double(val_.size() - 1); }
  /// Smallest R with |q(r)| <= rel_tol * |q(0)| for all tabulated r >= R.
  double support_radius(double rel_tol) const;
  /// Fraction of the d-dimensional mass of q^2 lying beyond radius R.
  double tail_fraction(double R, int dim) const;
  bool empty() const { return val_.empty(); }

 private:
  double interpolate(const std::vector<double>& table, double r, bool odd) const;

  double h_ = 0.0;
  std::vector<double> val_;
  std::vector<double> der_;
};

}  // namespace rnls
