#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rnls/evolve.hpp"
#include "rnls/field.hpp"
#include "rnls/profiles.hpp"

namespace rnls {

enum class LinearOp { plus, minus };

/// Relative errors of the six kernel relations
/// L+ grad Q = 0, L+ Lambda Q = -2Q, L+ rho = -|x|^2 Q,
/// L- Q = 0, L- xQ = -2 grad Q, L- |x|^2 Q = -4 Lambda Q.
struct KernelIdentityReport {
  double lplus_gradQ = 0.0;
  double lplus_LambdaQ = 0.0;
  double lplus_rho = 0.0;
  double lminus_Q = 0.0;
  double lminus_xQ = 0.0;
  double lminus_x2Q = 0.0;

  double max() const;
};

/// Operators linearized around Q on Q's grid, with the directions of the
/// orthogonality set K precomputed.
class LinearizedOps {
 public:
  /// rho may come from a wider grid; it is resampled through its radial table.
  LinearizedOps(const GroundState& gs, const RhoProfile& rho);

  const GridPtr& grid() const { return grid_; }
  int dim() const { return grid_->dim(); }
  const Field& Q() const { return Q_; }
  const Field& rho() const { return rho_; }

  /// -Delta f + f - (1 + 4/d) Q^{4/d} f (plus) or -Delta f + f - Q^{4/d} f (minus).
  Field apply(LinearOp which, const Field& f) const;
  /// (d/2) f + x . grad f.
  Field Lambda(const Field& f) const;

  /// {Q, x_j Q, |x|^2 Q}: directions for the real part.
  const std::vector<Field>& real_directions() const { return real_dirs_; }
  /// {d_j Q, Lambda Q, rho}: directions for the imaginary part.
  const std::vector<Field>& imag_directions() const { return imag_dirs_; }

  KernelIdentityReport kernel_identities() const;

 private:
  GridPtr grid_;
  Field Q_, rho_, V_;  // V = Q^{4/d}
  std::vector<Field> real_dirs_, imag_dirs_;
};

Field apply_L(LinearOp which, const Field& f, const LinearizedOps& ops);

/// Cutoff Phi of the localized coercivity: 1 for r <= 1, e^{-r} for r >= 2,
/// e^{-g(r)} in between with g the quintic Hermite bridge.
double coercivity_cutoff(double r);

/// (Lf, f) = <L+ f1, f1> + <L- f2, f2>; with A, the Phi_A-weighted form
/// int |grad f|^2 Phi_A + |f|^2 - (1 + 4/d) Q^{4/d} f1^2 - Q^{4/d} f2^2.
double coercivity_form(const Field& f, const LinearizedOps& ops, std::optional<double> A = std::nullopt);
/// ||f||_{H^1}^2, or int (|grad f|^2 + |f|^2) Phi_A with A.
double coercivity_norm(const Field& f, std::optional<double> A = std::nullopt);

/// Gram-Schmidt projection of f1 and f2 onto the complement of the K directions.
Field project_onto_K(const Field& f, const LinearizedOps& ops);
/// The six orthogonality residuals of f against K.
std::vector<double> k_residuals(const Field& f, const LinearizedOps& ops);

/// Smooth random field: four complex Gaussian bumps, drawn from (seed, index).
Field random_test_field(const GridPtr& grid, std::uint64_t seed, int index);

struct CoercivityStudy {
  std::vector<double> ratios;  ///< (Lf, f) / ||f||_{H^1}^2 per trial
  double nu_hat = 0.0;         ///< smallest ratio
  double max_k_residual = 0.0; ///< largest |<f, K direction>| / ||f|| after projection
};

/// Ratios over `trials` random fields projected onto K.
CoercivityStudy coercivity_study(const LinearizedOps& ops, int trials, std::uint64_t seed,
                                 std::optional<double> A = std::nullopt);

struct DecompositionResult {
  ModParams P;
  Field w;        ///< deformed profile in lab variables
  Field R;        ///< remainder u - w
  Field epsilon;  ///< remainder in rescaled variables
  std::vector<double> ortho_residuals;
  int newton_iters = 0;
  std::vector<double> residual_trace;
  bool support_warning = false;
};

struct DecomposeOptions {
  double tol_factor = 1e-10;  ///< residual tolerance in units of ||Q||_2^2
  int max_iter = 25;
  double fd_step = 1e-6;
};

/// The 2d+3 orthogonality functionals at P for the input u.
std::vector<double> orthogonality_functionals(const Field& u, const ModParams& P, const GroundState& gs,
                                              const RhoProfile& rho);

/// Newton iteration on the orthogonality functionals from P_init.
DecompositionResult decompose(const Field& u, const ModParams& P_init, const GroundState& gs, const RhoProfile& rho,
                              const DecomposeOptions& opt = {});

struct ModVectorSample {
  double t = 0.0;
  double mod = 0.0;
  std::array<double, 5> components{};
  ModParams P_dot;  ///< finite-difference derivatives
};

/// Unwraps theta so each value continues the linear trend of the previous two.
std::vector<ModParams> unwrap_theta(std::vector<ModParams> P);

/// |lambda lambda_t + gamma| + |lambda^2 gamma_t + gamma^2| + |lambda alpha_t - 2 beta|
///   + |lambda^2 beta_t + gamma beta| + |lambda^2 theta_t - 1 - |beta|^2|,
/// with second-order finite differences (one-sided at the ends).
std::vector<ModVectorSample> mod_vector(const std::vector<double>& t, const std::vector<ModParams>& P, int dim);

struct EtaResult {
  Field eta;
  double norm = 0.0;
};

/// eta = i d_t w + Delta w + |w|^{4/d} w + b . grad w + c w, with d_t w through P_dot.
EtaResult profile_residual_eta(const ModParams& P, const ModParams& P_dot, const GroundState& gs,
                               const GridPtr& grid, const NoiseDriver& noise = {}, double t = 0.0);

/// psi'(r) of the generalized-energy cutoff: r for r <= 1, 2 - e^{-r} for r >= 2,
/// and r (1 - a (r - 1)^p) in between, so psi is C^2 and psi'(r) / r is
/// non-increasing; second component is psi''(r).
std::array<double, 2> chi_psi_prime(double r);

/// Generalized energy I for u = w + R.
double generalized_energy(const Field& R, const Field& w, const ModParams& P, double A);

struct ModTrackRow {
  double t = 0.0;
  ModParams P;
  double mod = 0.0;
  double eps_l2 = 0.0;
  double eps_grad = 0.0;
  double I = 0.0;
};

/// Decomposes each snapshot, warm-starting from the previous parameters.
std::vector<ModTrackRow> track_modulation(const std::vector<std::pair<double, Field>>& snapshots,
                                          const ModParams& P_init, const GroundState& gs, const RhoProfile& rho,
                                          double A = 10.0);
void write_mod_track_csv(const std::filesystem::path& path, const std::vector<ModTrackRow>& rows, int dim);

}  // namespace rnls
