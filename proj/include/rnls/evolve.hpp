#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rnls/field.hpp"
#include "rnls/noise.hpp"

namespace rnls {

enum class Scheme { strang_gauge, yoshida4_gauge };
enum class TerminalStatus { completed, blowup_detected, resolution_exhausted };
enum class GaugeDirection { to_X, to_u };

std::string to_string(Scheme s);
std::string to_string(TerminalStatus s);
Scheme scheme_from_string(const std::string& s);

/// Noise seen by the solver: basis plus driving lift. A default-constructed
/// driver means zero noise.
struct NoiseDriver {
  const NoiseBasis* basis = nullptr;
  const BrownianLift* lift = nullptr;

  bool active() const { return basis != nullptr && lift != nullptr; }
  /// psi(t) = sum_k phi_k B_k(t), so that W = i psi; B is linear between lift nodes.
  Field potential(double t) const;
};

struct SolverConfig {
  double dt0 = 1e-3;
  bool adaptive = false;
  /// Adaptive rule dt = dt_c * min(dt0, 1 / ||grad u||^2); the run stops when it falls below dt_min.
  double dt_c = 0.1;
  double dt_min = 1e-10;
  double t_end = 1.0;
  /// Blow-up cap on ||grad u||; <= 0 selects 1e3 * ||grad u0||.
  double blowup_gradnorm_cap = 0.0;
  /// Resolution floor: stop when the width estimate drops below this many cells.
  double width_floor_cells = 8.0;
  /// Q(0) for the width estimate (Q(0) / max|u|)^{2/d}; <= 0 disables the floor.
  double q0 = 0.0;
  /// Ground-state mass for the per-step Gagliardo-Nirenberg check; <= 0 disables it.
  double q_mass = 0.0;
  Scheme scheme = Scheme::strang_gauge;
  /// Times at which the state is stored; steps are shortened to land on them.
  std::vector<double> snapshot_times;

  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  std::array<double, 2> momentum{0.0, 0.0};
  double gradnorm = 0.0;
  double lambda_est = 0.0;
  double gn_margin = 0.0;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<StepRecord> diagnostics;
  TerminalStatus status = TerminalStatus::completed;
  std::optional<double> tau_star_estimate;
  std::string note;
  std::vector<std::pair<double, Field>> snapshots;
  Field final_state;
  double gradnorm_cap = 0.0;
  bool gn_always_satisfied = true;
  double gn_min_margin = 0.0;

  /// Columns t, dt, mass, energy, px[, py], gradnorm.
  void write_csv(const std::filesystem::path& path, int dim) const;
};

/// Multiplies u by e^{W} (to_X) or e^{-W} (to_u); W must be purely imaginary.
Field gauge(const Field& u, const Field& W, GaugeDirection direction);

/// One step of the gauge-transformed equation from t to t + dt (dt may be negative).
Field step(const Field& u, double t, double dt, const NoiseDriver& noise = {},
           Scheme scheme = Scheme::strang_gauge);

using StepObserver = std::function<void(double t, const Field& u)>;

/// Integrates until t_end, the gradient cap, the resolution floor, or the dt floor.
/// The observer (if any) sees the initial state and every accepted step.
TrajectoryRecord run_trajectory(const Field& u0, const SolverConfig& cfg, const NoiseDriver& noise = {},
                                const StepObserver& observer = {});

/// Fit of 1/||grad u|| ~ kappa (tau - t) over the last decade of growth.
std::optional<double> estimate_blowup_time(const std::vector<double>& t, const std::vector<double>& gradnorm);

/// Right-hand side of the energy identity: the four-term form
/// -2 Re int Hess psi(grad u, grad u*) + 1/2 int Delta^2 psi |u|^2
///   + 2/(d+2) int Delta psi |u|^{2+4/d} - Im int grad |grad psi|^2 . grad u u*.
double energy_rate(const Field& u, const NoiseBasis& basis, const std::vector<double>& Bvals);
/// The same rate as Im int (b . grad u + c u) conj(Delta u + |u|^{4/d} u).
double energy_rate_compact(const Field& u, const NoiseBasis& basis, const std::vector<double>& Bvals);

struct EnergyAuditReport {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> rate;
  double measured_delta = 0.0;    ///< E(t_end) - E(t_0)
  double integrated_rate = 0.0;   ///< trapezoid of the rate
  double mismatch = 0.0;          ///< |measured - integrated|
  double relative_mismatch = 0.0; ///< mismatch / |measured|
};

/// Streaming audit: feed states in time order, then read the report.
class EnergyAudit {
 public:
  explicit EnergyAudit(NoiseDriver noise) : noise_(noise) {}
  void add(double t, const Field& u);
  EnergyAuditReport report() const;

 private:
  NoiseDriver noise_;
  EnergyAuditReport r_;
};

EnergyAuditReport energy_drift_audit(const std::vector<std::pair<double, Field>>& snapshots,
                                     const NoiseDriver& noise);

}  // namespace rnls
