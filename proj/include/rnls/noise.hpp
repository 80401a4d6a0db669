#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rnls/field.hpp"

namespace rnls {

enum class BasisKind { flat_poly_gauss, custom };

/// Outcome of the numeric (A0)/(A1) checks.
struct AssumptionReport {
  double a0_max = 0.0;  ///< max over the outer 10% of <x>^2 |d^nu phi|, 1 <= |nu| <= 2
  double a1_max = 0.0;  ///< max over |nu| <= 5 of |d^nu phi(0)| / max(1, sup|phi|)
  bool a0_ok = false;
  bool a1_ok = false;
};

/// Spatial noise modes phi_k with precomputed derivatives.
class NoiseBasis {
 public:
  static constexpr double a0_tol = 1e-6;
  static constexpr double a1_tol = 1e-10;

  /// phi_k = a_k |x|^6 exp(-|x|^2 / sigma_k^2), derivatives in closed form.
  static NoiseBasis flat_poly_gauss(const GridPtr& grid, std::vector<double> amplitudes,
                                    std::vector<double> widths);
  /// Arbitrary real modes; derivatives by spectral differentiation.
  static NoiseBasis custom(std::vector<Field> modes);
  /// Dispatch on kind; `widths` default to 1 + k/4 for the built-in family.
  static NoiseBasis make(BasisKind kind, int N, std::vector<double> amplitudes, const GridPtr& grid,
                         std::vector<double> widths = {});

  int size() const { return int(phi_.size()); }
  int dim() const { return grid_->dim(); }
  const GridPtr& grid_ptr() const { return grid_; }
  BasisKind kind() const { return kind_; }
  const std::vector<double>& amplitudes() const { return amps_; }
  const std::vector<double>& widths() const { return widths_; }

  const Field& phi(int k) const { return phi_.at(k); }
  const Field& grad(int k, int axis) const { return grad_.at(k)[axis]; }
  /// Second derivative d_a d_b phi_k.
  const Field& hess(int k, int a, int b) const { return hess_.at(k)[a + b]; }
  const Field& lap(int k) const { return lap_.at(k); }
  const Field& bilap(int k) const { return bilap_.at(k); }
  /// mu = (1/2) sum_k phi_k^2.
  const Field& mu() const { return mu_; }

  /// Pointwise value of the built-in family (for oracles); throws for custom bases.
  double phi_value(int k, double x, double y = 0.0) const;

  const AssumptionReport& assumptions() const { return report_; }

 private:
  NoiseBasis() = default;
  void finish();

  GridPtr grid_;
  BasisKind kind_ = BasisKind::custom;
  std::vector<double> amps_, widths_;
  std::vector<Field> phi_;
  std::vector<std::array<Field, 2>> grad_;
  std::vector<std::array<Field, 3>> hess_;  // index a + b: xx, xy, yy
  std::vector<Field> lap_, bilap_;
  Field mu_;
  AssumptionReport report_;
};

/// Runs the (A0)/(A1) checks on modes with given derivative fields.
AssumptionReport check_assumptions(const NoiseBasis& basis);

/// Derivative d^nu f at the origin by spectral differentiation; coefficients
/// below 1e-15 of the largest are dropped so round-off is not amplified.
double spectral_derivative_at_origin(const Field& f, std::array<int, 2> nu);

/// N Brownian paths on a time mesh with their Ito iterated integrals per cell.
struct BrownianLift {
  std::vector<double> mesh;  ///< t_0 < ... < t_M
  int N = 0;
  std::uint64_t seed = 0;
  int substeps = 0;
  std::vector<double> B;   ///< B[k * (M + 1) + i]
  std::vector<double> Bb;  ///< Bb[(i * N + j) * N + k] = int_{t_i}^{t_{i+1}} (B_j(r) - B_j(t_i)) dB_k(r)

  int cells() const { return int(mesh.size()) - 1; }
  double at(int k, int i) const { return B[std::size_t(k) * mesh.size() + i]; }
  double increment(int k, int cell) const { return at(k, cell + 1) - at(k, cell); }
  double iterated(int j, int k, int cell) const { return Bb[(std::size_t(cell) * N + j) * N + k]; }
  double& iterated_ref(int j, int k, int cell) { return Bb[(std::size_t(cell) * N + j) * N + k]; }

  /// B(t) for all k, linear between mesh points and held constant outside.
  std::vector<double> values_at(double t) const;
  /// Lift over every `factor` consecutive cells, combined with the Chen relation.
  BrownianLift coarsen(int factor) const;
  /// Lift restricted to mesh indices [first, last].
  BrownianLift slice(int first, int last) const;

  void save(const std::filesystem::path& path) const;
  static BrownianLift load(const std::filesystem::path& path);
};

/// Gaussian increments per sub-step from a counter-based generator keyed by
/// (seed, path, sub-step); off-diagonal iterated integrals by Ito left-point
/// sums, diagonal entries set to (dB^2 - dt)/2.
BrownianLift sample_brownian(int N, const std::vector<double>& mesh, int substeps, std::uint64_t seed);

/// Lift of the zero path.
BrownianLift zero_lift(int N, const std::vector<double>& mesh);

/// Uniform mesh with M cells on [0, T].
std::vector<double> uniform_mesh(double T, int M);

/// Largest Hoelder quotient |x(t) - x(s)| / |t - s|^alpha over mesh pairs.
double holder_norm(const std::vector<double>& mesh, const std::vector<double>& x, double alpha);
/// Slope of log max|x(t+h) - x(t)| against log h over dyadic lags.
double holder_exponent(const std::vector<double>& mesh, const std::vector<double>& x);

/// Coefficient fields of the gauge-transformed equation at given B values.
struct NoiseFields {
  Field W;                    ///< i sum phi_k B_k
  std::vector<Field> b;       ///< 2 grad W
  Field c;                    ///< sum_j (d_j W)^2 + Delta W
  Field mu;                   ///< (1/2) sum phi_k^2
};

NoiseFields noise_fields(const NoiseBasis& basis, const std::vector<double>& Bvals);
NoiseFields noise_fields(const NoiseBasis& basis, const BrownianLift& lift, int t_index);

/// psi = sum_k phi_k B_k (so W = i psi).
Field noise_potential(const NoiseBasis& basis, const std::vector<double>& Bvals);

}  // namespace rnls
