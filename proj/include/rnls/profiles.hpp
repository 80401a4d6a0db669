#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "rnls/field.hpp"
#include "rnls/radial.hpp"

namespace rnls {

/// Modulation parameters (lambda, alpha, beta, gamma, theta).
struct ModParams {
  double lambda = 1.0;
  std::array<double, 2> alpha{0.0, 0.0};
  std::array<double, 2> beta{0.0, 0.0};
  double gamma = 0.0;
  double theta = 0.0;

  /// Parameters of S_T at time t: (T-t, 0, 0, T-t, 1/(T-t)).
  static ModParams pseudo_conformal(double T, double t);

  /// Flat layout [lambda, alpha_1..d, beta_1..d, gamma, theta], length 2d+3.
  std::vector<double> to_vector(int d) const;
  static ModParams from_vector(const std::vector<double>& v, int d);
  bool valid() const;
};

struct GroundState {
  Field Q;
  double residual = 0.0;
  int dim = 1;
  double mass = 0.0;
  std::vector<double> residual_history;
  RadialProfile radial;
};

struct RhoProfile {
  Field rho;
  double residual = 0.0;
  std::vector<double> residual_history;
  RadialProfile radial;
};

/// A transformed field plus a flag raised when the transform moved
/// non-negligible content across the box boundary.
struct TransformResult {
  Field field;
  bool support_warning = false;
};

/// Petviashvili iteration for Delta Q - Q + Q^{1+4/d} = 0 from a Gaussian guess.
GroundState solve_ground_state(const GridPtr& grid, double tol = 1e-12, int max_iter = 2000);

/// Solves L_+ rho = -|x|^2 Q in the even sector by preconditioned MINRES.
RhoProfile solve_rho(const GroundState& gs, double tol = 1e-10, int max_iter = 500);

/// Relative residual ||Delta Q - Q + Q^{1+4/d}|| / ||Q||.
double ground_state_residual(const Field& Q);

/// Decay rate fitted to log|f| against |x| over radii where |f| is above `floor`.
double measure_decay_rate(const Field& f, double r_min, double r_max, double floor = 1e-13);

/// lambda^{-d/2} q(|y|) exp(i(beta.y - gamma|y|^2/4 + theta)), y = (x - alpha)/lambda.
TransformResult deformed_radial(const RadialProfile& q, const ModParams& P, const GridPtr& grid);
TransformResult deformed_profile(const GroundState& gs, const ModParams& P, const GridPtr& grid);

/// S_T(t, x) on `grid`; throws for t >= T.
Field pseudo_conformal_ST(const GroundState& gs, double T, double t, const GridPtr& grid);

/// Snapshot of the symmetry orbit at t = t0:
/// lambda0^{-d/2} u((x - x0)/lambda0) exp(i beta0.(x - x0)/2 + i theta0).
TransformResult apply_symmetry(const Field& u, double lambda0, std::array<double, 2> beta0, double theta0,
                               std::array<double, 2> x0);

/// (-t)^{-d/2} u(x/(-t)) exp(+i|x|^2/(4t)) for a snapshot u taken at time 1/(-t).
TransformResult pseudo_conformal_transform(const Field& u, double t);

/// Band-limited resampling f(x) = u((x - shift)/scale) per axis; zero where the
/// preimage leaves the box.
TransformResult resample_affine(const Field& u, double scale, std::array<double, 2> shift);

/// Disk cache keyed by (d, n, L): snapshot + sidecar JSON with residuals.
GroundState cached_ground_state(const GridPtr& grid, const std::optional<std::filesystem::path>& cache_dir,
                                double tol = 1e-12);
RhoProfile cached_rho(const GroundState& gs, const std::optional<std::filesystem::path>& cache_dir,
                      double tol = 1e-10);

}  // namespace rnls
