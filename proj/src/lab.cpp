#include "rnls/lab.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>
#include <thread>

#include "rnls/error.hpp"
#include "rnls/modulation.hpp"
#include "rnls/noise.hpp"
#include "rnls/roughpath.hpp"
#include "rnls/snapshot.hpp"
#include "rnls/spectral.hpp"

namespace rnls::lab {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) throw Error("expected a real number, got '" + s + "'");
  return v;
}

long long parse_integer(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) throw Error("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw Error("expected true or false, got '" + s + "'");
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

Experiment experiment_from_string(const std::string& s) {
  for (Experiment e : {Experiment::ground_state, Experiment::exact_soliton, Experiment::pseudoconformal,
                       Experiment::threshold_sweep, Experiment::rough_check, Experiment::modulation_track,
                       Experiment::evolve})
    if (to_string(e) == s) return e;
  throw Error("unknown experiment '" + s + "'");
}

InitKind init_from_string(const std::string& s) {
  for (InitKind k : {InitKind::gaussian, InitKind::ground, InitKind::ST})
    if (to_string(k) == s) return k;
  throw Error("unknown init '" + s + "' (gaussian, ground, ST)");
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
KeySpec key(const char* name, T RunConfig::*m) {
  KeySpec k{name, {}, {}};
  if constexpr (std::is_same_v<T, double>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = parse_double(v); };
    k.get = [m](const RunConfig& c) { return fmt(c.*m); };
  } else if constexpr (std::is_same_v<T, int>) {
    k.set = [m](RunConfig& c, const std::string& v) {
      const long long x = parse_integer(v);
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) throw Error("integer out of range");
      c.*m = int(x);
    };
    k.get = [m](const RunConfig& c) { return std::to_string(c.*m); };
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    k.set = [m](RunConfig& c, const std::string& v) {
      const long long x = parse_integer(v);
      if (x < 0) throw Error("expected a non-negative integer");
      c.*m = std::uint64_t(x);
    };
    k.get = [m](const RunConfig& c) { return std::to_string(c.*m); };
  } else if constexpr (std::is_same_v<T, bool>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = parse_bool(v); };
    k.get = [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); };
  } else if constexpr (std::is_same_v<T, std::string>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = trim(v); };
    k.get = [m](const RunConfig& c) { return c.*m; };
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = parse_list(v); };
    k.get = [m](const RunConfig& c) { return fmt_list(c.*m); };
  } else if constexpr (std::is_same_v<T, Scheme>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = scheme_from_string(trim(v)); };
    k.get = [m](const RunConfig& c) { return to_string(c.*m); };
  } else if constexpr (std::is_same_v<T, Experiment>) {
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = experiment_from_string(trim(v)); };
    k.get = [m](const RunConfig& c) { return to_string(c.*m); };
  } else {
    static_assert(std::is_same_v<T, InitKind>);
    k.set = [m](RunConfig& c, const std::string& v) { c.*m = init_from_string(trim(v)); };
    k.get = [m](const RunConfig& c) { return to_string(c.*m); };
  }
  return k;
}

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> s = {
      key("experiment", &RunConfig::experiment),
      key("dim", &RunConfig::dim),
      key("n", &RunConfig::n),
      key("L", &RunConfig::L),
      key("dt0", &RunConfig::dt0),
      key("adaptive", &RunConfig::adaptive),
      key("dt_c", &RunConfig::dt_c),
      key("dt_min", &RunConfig::dt_min),
      key("t_end", &RunConfig::t_end),
      key("scheme", &RunConfig::scheme),
      key("gradnorm_cap", &RunConfig::gradnorm_cap),
      key("width_floor_cells", &RunConfig::width_floor_cells),
      key("noise_modes", &RunConfig::noise_modes),
      key("noise_amps", &RunConfig::noise_amps),
      key("noise_widths", &RunConfig::noise_widths),
      key("lift_substeps", &RunConfig::lift_substeps),
      key("lift_cells", &RunConfig::lift_cells),
      key("seed", &RunConfig::seed),
      key("ensemble", &RunConfig::ensemble),
      key("threads", &RunConfig::threads),
      key("init", &RunConfig::init),
      key("mass_ratio", &RunConfig::mass_ratio),
      key("mass_ratios", &RunConfig::mass_ratios),
      key("T", &RunConfig::T),
      key("t0", &RunConfig::t0),
      key("snapshot_times", &RunConfig::snapshot_times),
      key("snapshot_every", &RunConfig::snapshot_every),
      key("member_diagnostics", &RunConfig::member_diagnostics),
      key("cutoff_A", &RunConfig::cutoff_A),
      key("output_dir", &RunConfig::output_dir),
      key("cache_dir", &RunConfig::cache_dir),
  };
  return s;
}

// Runs one pipeline stage, prefixing library errors with the stage name.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(name + ": " + e.what(), e.history());
  } catch (const Error& e) {
    throw Error(name + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::optional<fs::path> cache_of(const std::string& dir) {
  if (dir.empty()) return std::nullopt;
  return fs::path(dir);
}

GroundState ground(const GridPtr& g, const std::optional<fs::path>& cache) {
  return stage("ground state", [&] { return cached_ground_state(g, cache); });
}

// rho decays slowly, so it is solved on a wide reference box and resampled.
RhoProfile reference_rho(int dim, const std::optional<fs::path>& cache) {
  return stage("rho profile", [&] {
    auto g = dim == 1 ? make_grid(1, 4096, 40.0) : make_grid(2, 512, 32.0);
    return cached_rho(cached_ground_state(g, cache), cache);
  });
}

SolverConfig solver_config(const RunConfig& c, const GroundState& gs, double t_end) {
  SolverConfig s;
  s.dt0 = c.dt0;
  s.adaptive = c.adaptive;
  s.dt_c = c.dt_c;
  s.dt_min = c.dt_min;
  s.t_end = t_end;
  s.scheme = c.scheme;
  s.blowup_gradnorm_cap = c.gradnorm_cap;
  s.width_floor_cells = c.width_floor_cells;
  s.q0 = gs.Q.at_origin().real();
  s.q_mass = gs.mass;
  return s;
}

std::optional<NoiseBasis> make_basis(const RunConfig& c, const GridPtr& g) {
  if (c.noise_modes == 0) return std::nullopt;
  return stage("noise basis", [&] {
    return NoiseBasis::make(BasisKind::flat_poly_gauss, c.noise_modes, c.noise_amps, g, c.noise_widths);
  });
}

std::optional<BrownianLift> make_lift(const RunConfig& c, std::uint64_t seed, double horizon) {
  if (c.noise_modes == 0) return std::nullopt;
  const int cells = c.lift_cells > 0 ? c.lift_cells : std::max(1, int(std::ceil(horizon / c.dt0 - 1e-9)));
  return stage("brownian lift", [&] {
    return sample_brownian(c.noise_modes, uniform_mesh(horizon, cells), c.lift_substeps, seed);
  });
}

NoiseDriver driver(const std::optional<NoiseBasis>& b, const std::optional<BrownianLift>& l) {
  if (!b || !l) return {};
  return NoiseDriver{&*b, &*l};
}

Field initial_data(InitKind kind, const GroundState& gs, double ratio, double T, double t0) {
  auto g = gs.Q.grid_ptr();
  switch (kind) {
    case InitKind::ground:
      return gs.Q * cplx(ratio);
    case InitKind::gaussian: {
      Field f = Field::sample(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2.0); });
      f *= cplx(ratio * std::sqrt(gs.mass / mass(f)));
      return f;
    }
    case InitKind::ST:
      return pseudo_conformal_ST(gs, T, t0, g);
  }
  return gs.Q;
}

std::vector<double> snapshot_schedule(const RunConfig& c, double t_end, double offset) {
  std::vector<double> out;
  for (double s : c.snapshot_times)
    if (s - offset >= 0.0 && s - offset <= t_end) out.push_back(s - offset);
  if (c.snapshot_every > 0.0)
    for (int k = 1;; ++k) {
      double s = k * c.snapshot_every;
      if (s > t_end * (1.0 + 1e-12)) break;
      out.push_back(std::min(s, t_end));
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Snapshot files plus a snapshots.csv index (file, t) under dir/snapshots.
void write_snapshots(const fs::path& dir, const std::vector<std::pair<double, Field>>& snaps, double offset) {
  const fs::path sd = dir / "snapshots";
  fs::create_directories(sd);
  std::string index = "file,t\n";
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%04zu.rnls", i);
    write_snapshot(sd / name, snaps[i].second);
    index += std::string(name) + "," + fmt(snaps[i].first + offset) + "\n";
  }
  write_text(sd / "snapshots.csv", index);
}

double max_mass_drift(const TrajectoryRecord& rec) {
  if (rec.diagnostics.empty()) return 0.0;
  const double m0 = rec.diagnostics.front().mass;
  double d = 0.0;
  for (const auto& s : rec.diagnostics) d = std::max(d, std::abs(s.mass - m0) / m0);
  return d;
}

double max_gradnorm(const TrajectoryRecord& rec) {
  double g = 0.0;
  for (const auto& s : rec.diagnostics) g = std::max(g, s.gradnorm);
  return g;
}

json params_json(const ModParams& P, int d) {
  json j;
  j["lambda"] = P.lambda;
  j["alpha"] = d == 1 ? json::array({P.alpha[0]}) : json::array({P.alpha[0], P.alpha[1]});
  j["beta"] = d == 1 ? json::array({P.beta[0]}) : json::array({P.beta[0], P.beta[1]});
  j["gamma"] = P.gamma;
  j["theta"] = P.theta;
  return j;
}

json trajectory_json(const TrajectoryRecord& rec, double offset) {
  json j;
  j["status"] = to_string(rec.status);
  j["steps"] = rec.diagnostics.empty() ? 0 : rec.diagnostics.size() - 1;
  j["t_final"] = (rec.times.empty() ? 0.0 : rec.times.back()) + offset;
  j["tau_star_estimate"] = rec.tau_star_estimate ? json(*rec.tau_star_estimate + offset) : json(nullptr);
  j["gradnorm_cap"] = rec.gradnorm_cap;
  j["max_gradnorm"] = max_gradnorm(rec);
  j["mass_drift"] = max_mass_drift(rec);
  j["gn_always_satisfied"] = rec.gn_always_satisfied;
  j["gn_min_margin"] = rec.gn_min_margin;
  j["note"] = rec.note;
  return j;
}

// Decomposes snapshots in order until the first failure, then tracks the
// decomposable prefix.
struct TrackOutcome {
  std::vector<ModTrackRow> rows;
  std::size_t tracked = 0;
  std::string failure;
};

TrackOutcome track_prefix(const std::vector<std::pair<double, Field>>& snaps, const ModParams& P_init,
                          const GroundState& gs, const RhoProfile& rho, double A) {
  TrackOutcome out;
  ModParams guess = P_init;
  for (const auto& [t, u] : snaps) {
    try {
      guess = decompose(u, guess, gs, rho).P;
      ++out.tracked;
    } catch (const Error& e) {
      out.failure = "t = " + fmt(t) + ": " + e.what();
      break;
    }
  }
  if (out.tracked >= 3) {
    std::vector<std::pair<double, Field>> prefix(snaps.begin(), snaps.begin() + long(out.tracked));
    out.rows = stage("modulation tracking", [&] { return track_modulation(prefix, P_init, gs, rho, A); });
  }
  return out;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= double(n);
  my /= double(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

// Exponent p in Mod ~ lambda^p over rows with Mod > 0.
double mod_lambda_exponent(const std::vector<ModTrackRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.mod > 0.0 && r.P.lambda > 0.0) {
      x.push_back(std::log(r.P.lambda));
      y.push_back(std::log(r.mod));
    }
  return fit_slope(x, y);
}

// ---- experiments ----

void exp_ground_state(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  const double residual = ground_state_residual(gs.Q);
  auto& R = s.results();
  R["dim"] = c.dim;
  R["n"] = c.n;
  R["L"] = c.L;
  R["Q0"] = gs.Q.at_origin().real();
  R["mass"] = gs.mass;
  R["residual"] = residual;
  R["iterations"] = gs.residual_history.size();
  s.check("residual", residual, "<", 1e-10);
  if (c.dim == 1) {
    double sup = 0.0;
    for (std::size_t i = 0; i < gs.Q.size(); ++i) {
      const double x = g->coord(int(i));
      const double exact = std::pow(3.0, 0.25) / std::sqrt(std::cosh(2.0 * x));
      sup = std::max(sup, std::abs(gs.Q[i] - exact));
    }
    const double mass_error = std::abs(gs.mass - std::sqrt(3.0) * std::numbers::pi / 2.0);
    R["sup_error_closed_form"] = sup;
    R["mass_error_closed_form"] = mass_error;
    s.check("sup_error_closed_form", sup, "<", 1e-8);
    s.check("mass_error_closed_form", mass_error, "<", 1e-8);
  }
  write_snapshot(dir / "ground_state.rnls", gs.Q);
  s.artifact("ground_state.rnls");
  std::string csv = "x,Q\n";
  for (int i = 0; i < g->n(); ++i) {
    const std::size_t idx = c.dim == 1 ? g->flat(i) : g->flat(i, g->origin_index());
    csv += fmt(g->coord(i)) + "," + fmt(gs.Q[idx].real()) + "\n";
  }
  write_text(dir / "profile.csv", csv);
  s.artifact("profile.csv");
}

void exp_exact_soliton(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  auto rec = stage("evolve", [&] { return run_trajectory(gs.Q, solver_config(c, gs, c.t_end)); });
  const double t = rec.times.back();
  const double err = norm_l2(rec.final_state - gs.Q * std::polar(1.0, t)) / norm_l2(gs.Q);
  auto& R = s.results();
  R["trajectory"] = trajectory_json(rec, 0.0);
  R["l2_error"] = err;
  s.check_flag("completed", rec.status == TerminalStatus::completed);
  s.check("l2_error", err, "<", 1e-6);
  s.check("mass_drift", max_mass_drift(rec), "<", 1e-12);
  rec.write_csv(dir / "diagnostics.csv", c.dim);
  s.artifact("diagnostics.csv");
}

void exp_pseudoconformal(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  const double horizon = c.t_end - c.t0;
  auto basis = make_basis(c, g);
  auto lift = make_lift(c, c.seed, horizon);
  Field u0 = stage("initial data", [&] { return pseudo_conformal_ST(gs, c.T, c.t0, g); });
  auto sc = solver_config(c, gs, horizon);
  sc.snapshot_times = snapshot_schedule(c, horizon, c.t0);
  auto rec = stage("evolve", [&] { return run_trajectory(u0, sc, driver(basis, lift)); });

  auto& R = s.results();
  R["time_offset"] = c.t0;
  R["trajectory"] = trajectory_json(rec, c.t0);
  // ||grad u|| (T - t) over t <= 0.9 T, as a relative spread.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const double t = rec.times[i] + c.t0;
    if (t > 0.9 * c.T) break;
    const double v = rec.diagnostics[i].gradnorm * (c.T - t);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > 0.0) R["gradnorm_speed_spread"] = (hi - lo) / hi;
  s.check("mass_drift", max_mass_drift(rec), "<", 1e-10);
  const bool noisy = c.noise_modes > 0;
  if (c.t_end < c.T) {
    s.check_flag("completed", rec.status == TerminalStatus::completed);
    if (!noisy && rec.status == TerminalStatus::completed) {
      Field exact = pseudo_conformal_ST(gs, c.T, c.t_end, g);
      const double err = norm_l2(rec.final_state - exact);
      R["l2_error_vs_exact"] = err;
      s.check("l2_error_vs_exact", err, "<", 1e-4);
    }
  } else {
    s.check_flag("stopped_before_T", rec.status != TerminalStatus::completed);
    if (!noisy) {
      const double rel = rec.tau_star_estimate ? std::abs(*rec.tau_star_estimate + c.t0 - c.T) / c.T
                                               : std::numeric_limits<double>::quiet_NaN();
      s.check("tau_star_relative_error", rel, "<", 0.02);
    }
  }
  rec.write_csv(dir / "diagnostics.csv", c.dim);
  s.artifact("diagnostics.csv");
  if (!rec.snapshots.empty()) {
    write_snapshots(dir, rec.snapshots, c.t0);
    s.artifact("snapshots/snapshots.csv");
  }
}

// Runs fn(0..count-1) on a small pool; results go to caller-owned slots, so
// the output order does not depend on scheduling. The first failure by index
// is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int n = threads > 0 ? threads : int(std::max(1u, std::thread::hardware_concurrency()));
  n = std::max(1, std::min<int>(n, int(count)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct MemberResult {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  TerminalStatus status = TerminalStatus::completed;
  std::size_t steps = 0;
  double t_final = 0.0;
  double max_gradnorm = 0.0;
  double median_ratio = 0.0;
  bool gn_ok = true;
  double gn_min_margin = 0.0;
  std::optional<double> tau;
};

void exp_threshold_sweep(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  auto basis = make_basis(c, g);
  const auto sc = solver_config(c, gs, c.t_end);

  std::vector<MemberResult> members;
  for (double r : c.mass_ratios)
    for (int e = 0; e < c.ensemble; ++e) {
      MemberResult m;
      m.ratio = r;
      m.seed = c.seed + std::uint64_t(e);
      members.push_back(m);
    }
  auto member_name = [](const MemberResult& m) { return "r" + fmt(m.ratio) + "_s" + std::to_string(m.seed); };

  if (c.member_diagnostics) fs::create_directories(dir / "members");
  parallel_for(members.size(), c.threads, [&](std::size_t i) {
    auto& m = members[i];
    const InitKind kind = c.init == InitKind::ST ? InitKind::ground : c.init;
    Field u0 = m.ratio < 1.0 ? initial_data(kind, gs, m.ratio, c.T, 0.0)
                             : pseudo_conformal_ST(gs, c.T, 0.0, g) * cplx(m.ratio);
    auto lift = make_lift(c, m.seed, c.t_end);
    auto rec = stage("evolve " + member_name(m), [&] { return run_trajectory(u0, sc, driver(basis, lift)); });
    std::vector<double> gn;
    for (const auto& d : rec.diagnostics) gn.push_back(d.gradnorm);
    m.status = rec.status;
    m.steps = rec.diagnostics.size() - 1;
    m.t_final = rec.times.back();
    m.max_gradnorm = max_gradnorm(rec);
    m.median_ratio = max_running_median_ratio(gn);
    m.gn_ok = rec.gn_always_satisfied;
    m.gn_min_margin = rec.gn_min_margin;
    m.tau = rec.tau_star_estimate;
    if (c.member_diagnostics) {
      const fs::path md = dir / "members" / member_name(m);
      fs::create_directories(md);
      rec.write_csv(md / "diagnostics.csv", c.dim);
    }
  });

  std::string csv = "ratio,seed,status,steps,t_final,max_gradnorm,median_ratio,gn_min_margin,tau_star\n";
  json rows = json::array();
  for (const auto& m : members) {
    const std::string name = member_name(m);
    csv += fmt(m.ratio) + "," + std::to_string(m.seed) + "," + to_string(m.status) + "," + std::to_string(m.steps) +
           "," + fmt(m.t_final) + "," + fmt(m.max_gradnorm) + "," + fmt(m.median_ratio) + "," +
           fmt(m.gn_min_margin) + "," + (m.tau ? fmt(*m.tau) : std::string("nan")) + "\n";
    json j;
    j["ratio"] = m.ratio;
    j["seed"] = m.seed;
    j["status"] = to_string(m.status);
    j["max_gradnorm"] = m.max_gradnorm;
    j["median_ratio"] = m.median_ratio;
    j["gn_min_margin"] = m.gn_min_margin;
    j["tau_star_estimate"] = m.tau ? json(*m.tau) : json(nullptr);
    rows.push_back(j);
    if (m.ratio < 1.0) {
      s.check_flag(name + ".completed", m.status == TerminalStatus::completed);
      s.check(name + ".gradnorm_running_median_ratio", m.median_ratio, "<=", 5.0);
      s.check_flag(name + ".gn_satisfied", m.gn_ok);
    } else {
      s.check_flag(name + ".stopped", m.status != TerminalStatus::completed);
    }
  }
  s.results()["members"] = rows;
  write_text(dir / "sweep.csv", csv);
  s.artifact("sweep.csv");
}

struct RoughMember {
  std::uint64_t seed = 0;
  RoughResidualReport report;
  RefinementStudy study;
  double bdb_error = 0.0;
  json trajectory;
};

RoughMember rough_member(const RunConfig& c, const GroundState& gs, std::uint64_t seed) {
  auto g = gs.Q.grid_ptr();
  const int M = c.lift_cells > 0 ? c.lift_cells : 1024;
  const bool noisy = c.noise_modes > 0;
  const auto mesh = uniform_mesh(c.t_end, M);
  // Zero noise runs through the same pipeline with one mode of zero amplitude.
  NoiseBasis basis = noisy ? *make_basis(c, g)
                           : stage("noise basis", [&] { return NoiseBasis::make(BasisKind::flat_poly_gauss, 1, {0.0}, g); });
  BrownianLift lift = noisy ? stage("brownian lift", [&] { return sample_brownian(c.noise_modes, mesh, c.lift_substeps, seed); })
                            : zero_lift(1, mesh);
  NoiseDriver noise{&basis, &lift};

  auto sc = solver_config(c, gs, c.t_end);
  sc.adaptive = false;
  sc.dt0 = c.t_end / M;
  Field u0 = initial_data(c.init, gs, c.mass_ratio, c.T, c.t0);
  std::vector<Field> X;
  auto rec = stage("evolve", [&] {
    return run_trajectory(u0, sc, noise, [&](double t, const Field& u) {
      X.push_back(gauge(u, noise.potential(t) * cplx(0.0, 1.0), GaugeDirection::to_X));
    });
  });
  if (X.size() != mesh.size())
    throw Error("rough check: trajectory stopped early (" + to_string(rec.status) + ")");

  RoughMember m;
  m.seed = seed;
  m.trajectory = trajectory_json(rec, 0.0);
  Field test = Field::sample(g, [](double x, double y) { return std::exp(-(x * x + y * y)) * (1.0 + 0.5 * x); });
  m.report = stage("weak form", [&] { return verify_rough_solution(X, lift, basis, test, 0, M); });
  std::vector<int> factors;
  for (int f = 2; M / f >= 16; f *= 2)
    if (M % f == 0) factors.push_back(f);
  std::reverse(factors.begin(), factors.end());
  WeakFormSeries series(X, mesh, basis, test);
  m.study = stage("refinement", [&] { return rough_refinement(series, lift, factors); });
  m.report.rate_estimate = m.study.rate;
  if (noisy) {
    // int B dB with Y' = I against (B(T)^2 - T) / 2, mode by mode.
    ControlledPath Y(mesh, lift.N);
    for (int i = 0; i < Y.points(); ++i)
      for (int k = 0; k < lift.N; ++k) {
        Y.y(k, i) = lift.at(k, i);
        Y.yprime(k, k, i) = 1.0;
      }
    auto I = rough_integrate(Y, lift, 0, M);
    for (int k = 0; k < lift.N; ++k) {
      const double BT = lift.at(k, M);
      m.bdb_error = std::max(m.bdb_error, std::abs(I[k] - 0.5 * (BT * BT - c.t_end)));
    }
  }
  return m;
}

void exp_rough_check(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  std::vector<RoughMember> members(std::size_t(c.ensemble));
  parallel_for(members.size(), c.threads, [&](std::size_t i) {
    members[i] = rough_member(c, gs, c.seed + std::uint64_t(i));
  });

  // The pathwise residual fluctuates from level to level; the rate is fitted
  // to the ensemble mean.
  const auto& cells = members.front().study.cells;
  const auto& h = members.front().study.mesh_sizes;
  std::vector<double> mean(cells.size(), 0.0);
  for (const auto& m : members)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m.study.residuals[i] / double(members.size());
  const double rate = mean.size() >= 2 ? fit_rate(h, mean) : std::numeric_limits<double>::quiet_NaN();

  auto& R = s.results();
  json per = json::array();
  double bdb = 0.0, rhs = 0.0;
  std::string csv = "seed,cells,h,residual\n";
  for (const auto& m : members) {
    per.push_back({{"seed", m.seed},
                   {"trajectory", m.trajectory},
                   {"weak_form", m.report.to_json()},
                   {"residuals", m.study.residuals},
                   {"rate", m.study.rate}});
    bdb = std::max(bdb, m.bdb_error);
    rhs = std::max(rhs, std::abs(m.report.rhs));
    for (std::size_t i = 0; i < m.study.cells.size(); ++i)
      csv += std::to_string(m.seed) + "," + std::to_string(m.study.cells[i]) + "," + fmt(m.study.mesh_sizes[i]) +
             "," + fmt(m.study.residuals[i]) + "\n";
  }
  R["members"] = per;
  R["refinement"] = {{"cells", cells}, {"mesh_sizes", h}, {"mean_residuals", mean}, {"rate", rate}};
  write_text(dir / "refinement.csv", csv);
  s.artifact("refinement.csv");
  write_text(dir / "rough_report.json", members.front().report.to_json().dump(2) + "\n");
  s.artifact("rough_report.json");

  if (c.noise_modes == 0) {
    s.check("rhs_abs", rhs, "==", 0.0);
    return;
  }
  R["bdb_identity_error"] = bdb;
  s.check("refinement_rate", rate, ">=", 0.4);
  s.check("bdb_identity_error", bdb, "<", 1e-12);
}

void exp_modulation_track(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto cache = cache_of(c.cache_dir);
  auto gs = ground(g, cache);
  auto rho = reference_rho(c.dim, cache);
  const double horizon = c.t_end - c.t0;
  auto basis = make_basis(c, g);
  auto lift = make_lift(c, c.seed, horizon);
  Field u0 = stage("initial data", [&] { return pseudo_conformal_ST(gs, c.T, c.t0, g); });
  auto sc = solver_config(c, gs, horizon);
  sc.snapshot_times = snapshot_schedule(c, horizon, c.t0);
  auto rec = stage("evolve", [&] { return run_trajectory(u0, sc, driver(basis, lift)); });

  std::vector<std::pair<double, Field>> snaps{{c.t0, u0}};
  for (const auto& [t, u] : rec.snapshots) snaps.emplace_back(t + c.t0, u);
  auto track = track_prefix(snaps, ModParams::pseudo_conformal(c.T, c.t0), gs, rho, c.cutoff_A);

  auto& R = s.results();
  R["time_offset"] = c.t0;
  R["trajectory"] = trajectory_json(rec, c.t0);
  R["snapshots"] = snaps.size();
  R["tracked"] = track.tracked;
  R["tracking_stopped"] = track.failure;
  R["mod_lambda_exponent"] = mod_lambda_exponent(track.rows);
  s.check("tracked_rows", double(track.rows.size()), ">=", 3.0);
  double worst_lo = std::numeric_limits<double>::infinity(), worst_hi = 0.0;
  for (const auto& r : track.rows) {
    const double w = c.T - r.t;
    worst_lo = std::min(worst_lo, r.P.lambda / w);
    worst_hi = std::max(worst_hi, r.P.lambda / w);
  }
  if (!track.rows.empty()) {
    R["lambda_band"] = {worst_lo, worst_hi};
    s.check("lambda_over_T_minus_t_min", worst_lo, ">=", 0.5);
    s.check("lambda_over_T_minus_t_max", worst_hi, "<=", 3.0);
  }
  if (c.noise_modes == 0 && c.t_end >= c.T) {
    const double rel = rec.tau_star_estimate ? std::abs(*rec.tau_star_estimate + c.t0 - c.T) / c.T
                                             : std::numeric_limits<double>::quiet_NaN();
    s.check("tau_star_relative_error", rel, "<", 0.05);
  }
  rec.write_csv(dir / "diagnostics.csv", c.dim);
  s.artifact("diagnostics.csv");
  write_mod_track_csv(dir / "mod_track.csv", track.rows, c.dim);
  s.artifact("mod_track.csv");
}

void exp_evolve(const RunConfig& c, const fs::path& dir, Summary& s) {
  auto g = make_grid(c.dim, c.n, c.L);
  auto gs = ground(g, cache_of(c.cache_dir));
  const double offset = c.init == InitKind::ST ? c.t0 : 0.0;
  const double horizon = c.t_end - offset;
  auto basis = make_basis(c, g);
  auto lift = make_lift(c, c.seed, horizon);
  NoiseDriver noise = driver(basis, lift);
  Field u0 = stage("initial data", [&] { return initial_data(c.init, gs, c.mass_ratio, c.T, c.t0); });
  auto sc = solver_config(c, gs, horizon);
  sc.snapshot_times = snapshot_schedule(c, horizon, offset);
  EnergyAudit audit(noise);
  auto rec = stage("evolve", [&] {
    return run_trajectory(u0, sc, noise, [&](double t, const Field& u) {
      if (noise.active()) audit.add(t, u);
    });
  });

  auto& R = s.results();
  R["time_offset"] = offset;
  R["trajectory"] = trajectory_json(rec, offset);
  if (noise.active()) {
    auto a = audit.report();
    R["audit"] = {{"measured_delta", a.measured_delta},
                  {"integrated_rate", a.integrated_rate},
                  {"mismatch", a.mismatch},
                  {"relative_mismatch", a.relative_mismatch}};
  }
  s.check("mass_drift", max_mass_drift(rec), "<", 1e-10);
  if (c.init != InitKind::ST && c.mass_ratio < 1.0) {
    s.check_flag("completed", rec.status == TerminalStatus::completed);
    s.check_flag("gn_satisfied", rec.gn_always_satisfied);
  }
  rec.write_csv(dir / "diagnostics.csv", c.dim);
  s.artifact("diagnostics.csv");
  if (!rec.snapshots.empty()) {
    write_snapshots(dir, rec.snapshots, offset);
    s.artifact("snapshots/snapshots.csv");
  }
}

void write_summary(const fs::path& path, const Summary& s) { write_text(path, s.to_json().dump(2) + "\n"); }

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::ground_state: return "ground_state";
    case Experiment::exact_soliton: return "exact_soliton";
    case Experiment::pseudoconformal: return "pseudoconformal";
    case Experiment::threshold_sweep: return "threshold_sweep";
    case Experiment::rough_check: return "rough_check";
    case Experiment::modulation_track: return "modulation_track";
    case Experiment::evolve: return "evolve";
  }
  return "unknown";
}

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::gaussian: return "gaussian";
    case InitKind::ground: return "ground";
    case InitKind::ST: return "ST";
  }
  return "unknown";
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_double(item));
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const auto& s : schema()) k.push_back(s.name);
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& s : schema())
    if (s.name == key) {
      try {
        s.set(*this, value);
      } catch (const Error& e) {
        throw Error("config key '" + key + "': " + e.what());
      }
      return;
    }
  throw Error("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::vector<std::string> seen;
  std::stringstream ss(text);
  int lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string k = trim(line.substr(0, eq));
    if (std::find(seen.begin(), seen.end(), k) != seen.end())
      throw Error("config line " + std::to_string(lineno) + ": duplicate key '" + k + "'");
    seen.push_back(k);
    try {
      c.set(k, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& s : schema()) out += s.name + " = " + s.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invalid config: " + what);
  };
  need(dim == 1 || dim == 2, "dim must be 1 or 2");
  need(n >= 16 && (n & (n - 1)) == 0, "n must be a power of two >= 16");
  need(L > 0.0, "L must be positive");
  need(dt0 > 0.0, "dt0 must be positive");
  need(dt_c > 0.0 && dt_c <= 1.0, "dt_c must lie in (0, 1]");
  need(dt_min > 0.0, "dt_min must be positive");
  need(t_end > 0.0, "t_end must be positive");
  need(width_floor_cells >= 0.0, "width_floor_cells must be non-negative");
  need(noise_modes >= 0, "noise_modes must be non-negative");
  if (noise_modes > 0) {
    need(noise_amps.size() == 1 || int(noise_amps.size()) == noise_modes,
         "noise_amps needs one value or one per mode");
    need(noise_widths.empty() || int(noise_widths.size()) == noise_modes, "noise_widths needs one value per mode");
  }
  need(lift_substeps >= 1, "lift_substeps must be at least 1");
  need(lift_cells >= 0, "lift_cells must be non-negative");
  need(ensemble >= 1, "ensemble must be at least 1");
  need(threads >= 0, "threads must be non-negative");
  need(mass_ratio > 0.0, "mass_ratio must be positive");
  need(!mass_ratios.empty(), "mass_ratios must not be empty");
  for (double r : mass_ratios) need(r > 0.0, "mass_ratios must be positive");
  need(T > 0.0, "T must be positive");
  need(t0 >= 0.0 && t0 < T, "t0 must lie in [0, T)");
  need(snapshot_every >= 0.0, "snapshot_every must be non-negative");
  need(cutoff_A > 0.0, "cutoff_A must be positive");
  need(!output_dir.empty(), "output_dir must not be empty");
  need(ensemble == 1 || experiment == Experiment::threshold_sweep || experiment == Experiment::rough_check,
       "ensemble > 1 needs experiment = threshold_sweep or rough_check");
  if (experiment == Experiment::exact_soliton) need(noise_modes == 0, "exact_soliton needs noise_modes = 0");
  if (experiment == Experiment::pseudoconformal || experiment == Experiment::modulation_track ||
      (experiment == Experiment::evolve && init == InitKind::ST))
    need(t_end > t0, "t_end must exceed t0");
  if (experiment == Experiment::rough_check) {
    need(lift_cells == 0 || lift_cells >= 32, "rough_check needs lift_cells >= 32");
    need(init != InitKind::ST, "rough_check needs init = ground or gaussian");
  }
}

Summary::Summary(std::string experiment, std::uint64_t seed) : experiment_(std::move(experiment)), seed_(seed) {}

void Summary::check(const std::string& name, double value, const std::string& relation, double threshold) {
  bool pass = false;
  if (relation == "<") pass = value < threshold;
  else if (relation == "<=") pass = value <= threshold;
  else if (relation == ">=") pass = value >= threshold;
  else if (relation == "==") pass = value == threshold;
  else if (relation == "!=") pass = value != threshold;
  else throw Error("unknown check relation '" + relation + "'");
  checks_.push_back({name, value, threshold, 0.0, relation, pass});
}

void Summary::check_in(const std::string& name, double value, double lo, double hi) {
  checks_.push_back({name, value, lo, hi, "in", value >= lo && value <= hi});
}

void Summary::check_flag(const std::string& name, bool ok) { check(name, ok ? 1.0 : 0.0, "==", 1.0); }

bool Summary::passed() const {
  return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
}

json Summary::to_json() const {
  json j;
  j["schema"] = "rnls.summary";
  j["version"] = kSummaryVersion;
  j["experiment"] = experiment_;
  j["seed"] = seed_;
  j["passed"] = passed();
  json checks = json::array();
  for (const auto& c : checks_) {
    json e;
    e["name"] = c.name;
    e["value"] = std::isfinite(c.value) ? json(c.value) : json(nullptr);
    e["relation"] = c.relation;
    e["threshold"] = c.relation == "in" ? json::array({c.threshold, c.threshold_hi}) : json(c.threshold);
    e["pass"] = c.pass;
    checks.push_back(e);
  }
  j["checks"] = checks;
  j["results"] = results_;
  j["artifacts"] = artifacts_;
  return j;
}

RunResult run(const RunConfig& cfg, const std::string& config_text) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "config.txt", config_text.empty() ? cfg.to_text() : config_text);
  Summary s(to_string(cfg.experiment), cfg.seed);
  switch (cfg.experiment) {
    case Experiment::ground_state: exp_ground_state(cfg, dir, s); break;
    case Experiment::exact_soliton: exp_exact_soliton(cfg, dir, s); break;
    case Experiment::pseudoconformal: exp_pseudoconformal(cfg, dir, s); break;
    case Experiment::threshold_sweep: exp_threshold_sweep(cfg, dir, s); break;
    case Experiment::rough_check: exp_rough_check(cfg, dir, s); break;
    case Experiment::modulation_track: exp_modulation_track(cfg, dir, s); break;
    case Experiment::evolve: exp_evolve(cfg, dir, s); break;
  }
  write_summary(dir / "summary.json", s);
  return {s.to_json(), s.passed(), dir};
}

RunResult run_modfit(const ModfitOptions& opt) {
  if (fs::is_directory(opt.input)) {
    const fs::path index = opt.input / "snapshots.csv";
    std::ifstream in(index);
    if (!in) throw Error("modfit: missing " + index.string());
    std::vector<std::pair<double, Field>> snaps;
    std::string line;
    std::getline(in, line);
    if (trim(line) != "file,t") throw Error("modfit: " + index.string() + " must start with the header file,t");
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw Error("modfit: malformed index line '" + line + "'");
      const double t = parse_double(line.substr(comma + 1));
      snaps.emplace_back(t, stage("read snapshot", [&] { return read_snapshot(opt.input / line.substr(0, comma)); }));
    }
    if (snaps.size() < 3) throw Error("modfit: time-series mode needs at least 3 snapshots");
    std::stable_sort(snaps.begin(), snaps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const int d = snaps.front().second.grid().dim();
    auto gs = ground(snaps.front().second.grid_ptr(), opt.cache_dir);
    auto rho = reference_rho(d, opt.cache_dir);
    const ModParams P0 = ModParams::from_vector(opt.pinit, d);
    if (!P0.valid()) throw Error("modfit: invalid initial parameters");
    auto track = track_prefix(snaps, P0, gs, rho, opt.cutoff_A);

    Summary s("modfit", 0);
    s.results()["snapshots"] = snaps.size();
    s.results()["tracked"] = track.tracked;
    s.results()["tracking_stopped"] = track.failure;
    s.results()["mod_lambda_exponent"] = mod_lambda_exponent(track.rows);
    s.check("tracked_fraction", double(track.tracked) / double(snaps.size()), "==", 1.0);
    fs::create_directories(opt.out);
    write_mod_track_csv(opt.out / "mod_track.csv", track.rows, d);
    s.artifact("mod_track.csv");
    write_summary(opt.out / "summary.json", s);
    return {s.to_json(), s.passed(), opt.out};
  }

  Field u = stage("read snapshot", [&] { return read_snapshot(opt.input); });
  const int d = u.grid().dim();
  if (int(opt.pinit.size()) != 2 * d + 3)
    throw Error("modfit: --pinit needs " + std::to_string(2 * d + 3) + " values for d = " + std::to_string(d));
  const ModParams P0 = ModParams::from_vector(opt.pinit, d);
  auto gs = ground(u.grid_ptr(), opt.cache_dir);
  auto rho = reference_rho(d, opt.cache_dir);
  auto res = stage("decompose", [&] { return decompose(u, P0, gs, rho); });

  Summary s("modfit", 0);
  auto& R = s.results();
  R["P"] = params_json(res.P, d);
  R["newton_iters"] = res.newton_iters;
  R["residual_trace"] = res.residual_trace;
  R["ortho_residuals"] = res.ortho_residuals;
  R["R_l2"] = norm_l2(res.R);
  R["epsilon_h1"] = std::sqrt(h1_norm_squared(res.epsilon));
  R["support_warning"] = res.support_warning;
  double worst = 0.0;
  for (double r : res.ortho_residuals) worst = std::max(worst, std::abs(r));
  s.check("max_ortho_residual", worst, "<", 1e-10 * gs.mass);
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  write_summary(opt.out, s);
  return {s.to_json(), s.passed(), opt.out.parent_path()};
}

double max_running_median_ratio(const std::vector<double>& values) {
  std::priority_queue<double> low;
  std::priority_queue<double, std::vector<double>, std::greater<double>> high;
  double worst = 0.0;
  for (double v : values) {
    if (low.empty() || v <= low.top()) low.push(v);
    else high.push(v);
    if (low.size() > high.size() + 1) {
      high.push(low.top());
      low.pop();
    } else if (high.size() > low.size()) {
      low.push(high.top());
      high.pop();
    }
    const double median = low.size() > high.size() ? low.top() : 0.5 * (low.top() + high.top());
    if (median > 0.0) worst = std::max(worst, v / median);
  }
  return worst;
}

}  // namespace rnls::lab
