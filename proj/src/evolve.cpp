#include "rnls/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "rnls/error.hpp"
#include "rnls/spectral.hpp"

namespace rnls {

namespace {

void nonlinear_phase(Field& u, double h) {
  const double p = 4.0 / u.grid().dim();
  for (auto& z : u.values()) z *= std::polar(1.0, h * std::pow(std::abs(z), p));
}

void free_flow(Field& v, double h) {
  Field vh = to_spectral(v);
  const Grid& g = v.grid();
  for (std::size_t idx = 0; idx < vh.size(); ++idx) vh[idx] *= std::polar(1.0, -g.k_squared(idx) * h);
  v = from_spectral(vh);
}

// Strang substep from t to t + h with the gauge frozen at the midpoint.
void strang(Field& u, double t, double h, const NoiseDriver& noise) {
  nonlinear_phase(u, 0.5 * h);
  if (noise.active()) {
    const Field psi = noise.potential(t + 0.5 * h);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] *= std::polar(1.0, psi[q].real());
    free_flow(u, h);
    for (std::size_t q = 0; q < u.size(); ++q) u[q] *= std::polar(1.0, -psi[q].real());
  } else {
    free_flow(u, h);
  }
  nonlinear_phase(u, 0.5 * h);
}

struct Diagnostics {
  double mass, energy, gradnorm;
  std::array<double, 2> momentum{0.0, 0.0};
};

Diagnostics measure(const Field& u) {
  Diagnostics d{};
  const int dim = u.grid().dim();
  auto grad = gradient(u);
  double g2 = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double n = norm_l2(grad[a]);
    g2 += n * n;
    d.momentum[a] = inner(grad[a], u).imag();
  }
  d.mass = mass(u);
  d.gradnorm = std::sqrt(g2);
  d.energy = 0.5 * g2 - double(dim) / (2.0 * dim + 4.0) * potential_integral(u);
  return d;
}

}  // namespace

std::string to_string(Scheme s) {
  return s == Scheme::strang_gauge ? "strang_gauge" : "yoshida4_gauge";
}

std::string to_string(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::completed: return "completed";
    case TerminalStatus::blowup_detected: return "blowup_detected";
    case TerminalStatus::resolution_exhausted: return "resolution_exhausted";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "strang_gauge") return Scheme::strang_gauge;
  if (s == "yoshida4_gauge") return Scheme::yoshida4_gauge;
  throw Error("unknown scheme '" + s + "'");
}

Field NoiseDriver::potential(double t) const {
  if (!active()) throw Error("noise driver has no basis or lift");
  return noise_potential(*basis, lift->values_at(t));
}

void SolverConfig::validate() const {
  if (!(dt0 > 0.0)) throw Error("dt0 must be positive");
  if (!(t_end > 0.0)) throw Error("t_end must be positive");
  if (adaptive && !(dt_c > 0.0)) throw Error("adaptive constant must be positive");
  if (!(dt_min > 0.0)) throw Error("dt_min must be positive");
  if (!(width_floor_cells >= 0.0)) throw Error("width floor must be non-negative");
  for (double s : snapshot_times)
    if (!(s >= 0.0 && s <= t_end)) throw Error("snapshot time outside [0, t_end]");
}

Field gauge(const Field& u, const Field& W, GaugeDirection direction) {
  require_same_grid(u, W);
  const double sign = direction == GaugeDirection::to_X ? 1.0 : -1.0;
  Field out(u.grid_ptr());
  for (std::size_t q = 0; q < u.size(); ++q) {
    if (std::abs(W[q].real()) > 1e-12) throw Error("non-conservative gauge: W has a real part");
    out[q] = u[q] * std::polar(1.0, sign * W[q].imag());
  }
  return out;
}

Field step(const Field& u, double t, double dt, const NoiseDriver& noise, Scheme scheme) {
  Field v = u;
  if (scheme == Scheme::strang_gauge) {
    strang(v, t, dt, noise);
  } else {
    const double c = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - c), w0 = -c / (2.0 - c);
    strang(v, t, w1 * dt, noise);
    strang(v, t + w1 * dt, w0 * dt, noise);
    strang(v, t + (w1 + w0) * dt, w1 * dt, noise);
  }
  return v;
}

std::optional<double> estimate_blowup_time(const std::vector<double>& t, const std::vector<double>& gradnorm) {
  if (t.size() != gradnorm.size() || t.size() < 3) return std::nullopt;
  const double gmax = gradnorm.back();
  std::size_t first = 0;
  for (std::size_t i = t.size(); i-- > 0;)
    if (gradnorm[i] <= 0.1 * gmax) {
      first = i;
      break;
    }
  if (t.size() - first < 3) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(t.size() - first);
  for (std::size_t i = first; i < t.size(); ++i) {
    const double y = 1.0 / gradnorm[i];
    sx += t[i];
    sy += y;
    sxx += t[i] * t[i];
    sxy += t[i] * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) return std::nullopt;
  const double slope = (n * sxy - sx * sy) / den;
  const double icpt = (sy - slope * sx) / n;
  if (!(slope < 0.0)) return std::nullopt;
  return -icpt / slope;
}

TrajectoryRecord run_trajectory(const Field& u0, const SolverConfig& cfg, const NoiseDriver& noise,
                                const StepObserver& observer) {
  cfg.validate();
  if (!u0.all_finite()) throw Error("initial state is not finite");
  if (noise.active()) {
    if (noise.basis->grid_ptr() && !(*noise.basis->grid_ptr() == u0.grid()))
      throw Error("noise basis and initial state live on different grids");
    if (noise.lift->N != noise.basis->size()) throw Error("lift and basis have different numbers of modes");
    if (noise.lift->mesh.front() > 0.0 || noise.lift->mesh.back() < cfg.t_end * (1.0 - 1e-12))
      throw Error("lift does not cover [0, t_end]");
  }
  const Grid& grid = u0.grid();
  const int dim = grid.dim();

  TrajectoryRecord rec;
  std::vector<double> snaps = cfg.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;

  Field u = u0;
  double t = 0.0;
  rec.gn_min_margin = std::numeric_limits<double>::infinity();

  auto record = [&](double dt_used) {
    Diagnostics d = measure(u);
    StepRecord s;
    s.t = t;
    s.dt = dt_used;
    s.mass = d.mass;
    s.energy = d.energy;
    s.momentum = d.momentum;
    s.gradnorm = d.gradnorm;
    s.lambda_est = cfg.q0 > 0.0 ? std::pow(cfg.q0 / u.max_abs(), 2.0 / dim)
                                : std::numeric_limits<double>::quiet_NaN();
    if (cfg.q_mass > 0.0) {
      const double left = (1.0 - std::pow(d.mass / cfg.q_mass, 2.0 / dim)) * d.gradnorm * d.gradnorm;
      const double right = 2.0 * d.energy;
      s.gn_margin = right - left;
      rec.gn_min_margin = std::min(rec.gn_min_margin, s.gn_margin);
      if (left > right + 1e-10 * (1.0 + d.gradnorm * d.gradnorm)) rec.gn_always_satisfied = false;
    } else {
      s.gn_margin = std::numeric_limits<double>::quiet_NaN();
    }
    rec.times.push_back(t);
    rec.diagnostics.push_back(s);
    while (next_snap < snaps.size() && std::abs(snaps[next_snap] - t) <= 1e-12 * std::max(1.0, cfg.t_end)) {
      rec.snapshots.emplace_back(snaps[next_snap], u);
      ++next_snap;
    }
    if (observer) observer(t, u);
    return s;
  };

  StepRecord cur = record(0.0);
  rec.gradnorm_cap = cfg.blowup_gradnorm_cap > 0.0 ? cfg.blowup_gradnorm_cap : 1e3 * cur.gradnorm;
  const double floor = cfg.width_floor_cells * grid.dx();
  const double eps = 1e-12 * std::max(1.0, cfg.t_end);

  while (t < cfg.t_end - eps) {
    double dt = cfg.dt0;
    if (cfg.adaptive) {
      dt = cfg.dt_c * std::min(cfg.dt0, 1.0 / (cur.gradnorm * cur.gradnorm));
      if (dt < cfg.dt_min) {
        rec.status = TerminalStatus::resolution_exhausted;
        rec.note = "time step fell below dt_min";
        break;
      }
    }
    double target = cfg.t_end;
    if (next_snap < snaps.size()) target = std::min(target, snaps[next_snap]);
    if (t + dt > target - eps) dt = target - t;

    u = step(u, t, dt, noise, cfg.scheme);
    t = (std::abs(t + dt - target) <= eps) ? target : t + dt;

    if (!u.all_finite()) {
      rec.status = TerminalStatus::resolution_exhausted;
      rec.note = "state became non-finite";
      break;
    }
    cur = record(dt);
    if (cur.gradnorm > rec.gradnorm_cap) {
      rec.status = TerminalStatus::blowup_detected;
      rec.note = "gradient norm exceeded the cap";
      break;
    }
    if (cfg.q0 > 0.0 && cur.lambda_est < floor) {
      rec.status = TerminalStatus::resolution_exhausted;
      rec.note = "width estimate below the resolution floor";
      break;
    }
  }
  if (!std::isfinite(rec.gn_min_margin)) rec.gn_min_margin = std::numeric_limits<double>::quiet_NaN();

  if (rec.status != TerminalStatus::completed) {
    std::vector<double> g;
    g.reserve(rec.diagnostics.size());
    for (const auto& s : rec.diagnostics) g.push_back(s.gradnorm);
    rec.tau_star_estimate = estimate_blowup_time(rec.times, g);
  }
  rec.final_state = u;
  return rec;
}

void TrajectoryRecord::write_csv(const std::filesystem::path& path, int dim) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << (dim == 1 ? "t,dt,mass,energy,px,gradnorm\n" : "t,dt,mass,energy,px,py,gradnorm\n");
  char buf[512];
  for (const auto& s : diagnostics) {
    if (dim == 1)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.dt, s.mass, s.energy,
                    s.momentum[0], s.gradnorm);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.dt, s.mass, s.energy,
                    s.momentum[0], s.momentum[1], s.gradnorm);
    out << buf;
  }
}

double energy_rate(const Field& u, const NoiseBasis& basis, const std::vector<double>& Bvals) {
  if (int(Bvals.size()) != basis.size()) throw Error("need one B value per noise mode");
  const Grid& g = u.grid();
  const int d = g.dim();
  const std::size_t n = u.size();
  std::vector<double> H(3 * n, 0.0), G(2 * n, 0.0), L(n, 0.0), L2(n, 0.0);
  for (int k = 0; k < basis.size(); ++k) {
    const double b = Bvals[k];
    for (std::size_t q = 0; q < n; ++q) {
      L[q] += b * basis.lap(k)[q].real();
      L2[q] += b * basis.bilap(k)[q].real();
      for (int a = 0; a < d; ++a) G[a * n + q] += b * basis.grad(k, a)[q].real();
      for (int s = 0; s < 2 * d - 1; ++s) H[s * n + q] += b * basis.hess(k, (s + 1) / 2, s / 2)[q].real();
    }
  }
  auto hess = [&](int a, int b, std::size_t q) { return H[std::size_t(a + b) * n + q]; };
  auto grad = gradient(u);
  const double p = 4.0 / d;
  double t1 = 0, t2 = 0, t3 = 0, t4 = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double m = std::norm(u[q]);
    t2 += L2[q] * m;
    t3 += L[q] * std::pow(m, 1.0 + 0.5 * p);
    for (int a = 0; a < d; ++a) {
      double grad_g = 0.0;
      for (int b = 0; b < d; ++b) {
        t1 += hess(a, b, q) * (grad[a][q] * std::conj(grad[b][q])).real();
        grad_g += 2.0 * hess(a, b, q) * G[b * n + q];
      }
      t4 += grad_g * (grad[a][q] * std::conj(u[q])).imag();
    }
  }
  return g.cell_volume() * (-2.0 * t1 + 0.5 * t2 + 2.0 / (d + 2.0) * t3 - t4);
}

double energy_rate_compact(const Field& u, const NoiseBasis& basis, const std::vector<double>& Bvals) {
  NoiseFields nf = noise_fields(basis, Bvals);
  const int d = u.grid().dim();
  const double p = 4.0 / d;
  Field f = laplacian(u);
  for (std::size_t q = 0; q < u.size(); ++q) f[q] += std::pow(std::abs(u[q]), p) * u[q];
  auto grad = gradient(u);
  cplx s = 0.0;
  for (std::size_t q = 0; q < u.size(); ++q) {
    cplx lhs = nf.c[q] * u[q];
    for (int a = 0; a < d; ++a) lhs += nf.b[a][q] * grad[a][q];
    s += lhs * std::conj(f[q]);
  }
  return s.imag() * u.grid().cell_volume();
}

void EnergyAudit::add(double t, const Field& u) {
  if (!r_.times.empty() && !(t > r_.times.back())) throw Error("audit times must increase");
  r_.times.push_back(t);
  r_.energy.push_back(energy(u));
  r_.rate.push_back(noise_.active() ? energy_rate(u, *noise_.basis, noise_.lift->values_at(t)) : 0.0);
}

EnergyAuditReport EnergyAudit::report() const {
  if (r_.times.size() < 2) throw Error("energy audit needs at least two states");
  EnergyAuditReport r = r_;
  r.measured_delta = r.energy.back() - r.energy.front();
  r.integrated_rate = 0.0;
  for (std::size_t i = 0; i + 1 < r.times.size(); ++i)
    r.integrated_rate += 0.5 * (r.times[i + 1] - r.times[i]) * (r.rate[i] + r.rate[i + 1]);
  r.mismatch = std::abs(r.measured_delta - r.integrated_rate);
  r.relative_mismatch = std::abs(r.measured_delta) > 0.0 ? r.mismatch / std::abs(r.measured_delta)
                                                         : std::numeric_limits<double>::infinity();
  return r;
}

EnergyAuditReport energy_drift_audit(const std::vector<std::pair<double, Field>>& snapshots,
                                     const NoiseDriver& noise) {
  EnergyAudit audit(noise);
  for (const auto& [t, u] : snapshots) audit.add(t, u);
  return audit.report();
}

}  // namespace rnls
