#include "rnls/profiles.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "rnls/error.hpp"
#include "rnls/fft.hpp"
#include "rnls/krylov.hpp"
#include "rnls/snapshot.hpp"
#include "rnls/spectral.hpp"

namespace rnls {

ModParams ModParams::pseudo_conformal(double T, double t) {
  ModParams P;
  P.lambda = T - t;
  P.gamma = T - t;
  P.theta = 1.0 / (T - t);
  return P;
}

std::vector<double> ModParams::to_vector(int d) const {
  std::vector<double> v;
  v.push_back(lambda);
  for (int j = 0; j < d; ++j) v.push_back(alpha[j]);
  for (int j = 0; j < d; ++j) v.push_back(beta[j]);
  v.push_back(gamma);
  v.push_back(theta);
  return v;
}

ModParams ModParams::from_vector(const std::vector<double>& v, int d) {
  if (int(v.size()) != 2 * d + 3) throw Error("modulation vector must have 2d+3 entries");
  ModParams P;
  P.lambda = v[0];
  for (int j = 0; j < d; ++j) P.alpha[j] = v[1 + j];
  for (int j = 0; j < d; ++j) P.beta[j] = v[1 + d + j];
  P.gamma = v[1 + 2 * d];
  P.theta = v[2 + 2 * d];
  return P;
}

bool ModParams::valid() const {
  bool finite = std::isfinite(lambda) && std::isfinite(gamma) && std::isfinite(theta);
  for (int j = 0; j < 2; ++j) finite = finite && std::isfinite(alpha[j]) && std::isfinite(beta[j]);
  return finite && lambda > 0.0;
}

// ---------------------------------------------------------------------------
// Ground state

GroundState solve_ground_state(const GridPtr& grid, double tol, int max_iter) {
  if (!(tol > 0.0 && tol <= 1e-6)) throw Error("ground-state tolerance must lie in (0, 1e-6]");
  if (grid->dx() > 0.1) throw Error("grid too coarse to resolve the ground state (dx > 0.1)");
  const int d = grid->dim();
  const double p = 1.0 + 4.0 / d;
  const double stab = p / (p - 1.0);

  Field v = Field::sample(grid, [](double x, double y) { return std::exp(-(x * x + y * y)); });
  Field vhat = to_spectral(v);
  Field vp(grid);
  std::vector<double> history;

  for (int it = 0; it < max_iter; ++it) {
    v = from_spectral(vhat);
    for (std::size_t i = 0; i < v.size(); ++i) {
      double re = v[i].real();
      v[i] = re;
      vp[i] = std::pow(std::abs(re), p - 1.0) * re;
    }
    Field vphat = to_spectral(vp);
    double num = 0.0, den = 0.0, vnorm = 0.0, rnorm = 0.0;
    for (std::size_t i = 0; i < vhat.size(); ++i) {
      const double sym = 1.0 + grid->k_squared(i);
      num += sym * std::norm(vhat[i]);
      den += (vphat[i] * std::conj(vhat[i])).real();
      vnorm += std::norm(vhat[i]);
      rnorm += std::norm(vphat[i] - sym * vhat[i]);
    }
    const double residual = std::sqrt(rnorm / vnorm);
    history.push_back(residual);
    if (residual < tol) {
      GroundState gs;
      gs.Q = v;
      gs.residual = ground_state_residual(v);
      gs.dim = d;
      gs.mass = mass(v);
      gs.residual_history = std::move(history);
      gs.radial = RadialProfile::from_field(gs.Q);
      return gs;
    }
    const double scale = std::pow(num / den, stab);
    for (std::size_t i = 0; i < vhat.size(); ++i) vhat[i] = scale * vphat[i] / (1.0 + grid->k_squared(i));
  }
  char msg[128];
  std::snprintf(msg, sizeof msg, "Petviashvili iteration did not converge (last residual %.3e)", history.back());
  throw ConvergenceError(msg, history);
}

double ground_state_residual(const Field& Q) {
  const double p = 1.0 + 4.0 / Q.grid().dim();
  Field r = laplacian(Q) - Q;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += std::pow(std::abs(Q[i]), p - 1.0) * Q[i];
  return norm_l2(r) / norm_l2(Q);
}

// ---------------------------------------------------------------------------
// rho

namespace {

std::vector<double> even_part(const Grid& g, const std::vector<double>& f) {
  std::vector<double> out(f.size());
  const int n = g.n();
  if (g.dim() == 1) {
    for (int i = 0; i < n; ++i) out[i] = 0.5 * (f[i] + f[g.mirror(i)]);
  } else {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int mi = g.mirror(i), mj = g.mirror(j);
        out[g.flat(i, j)] = 0.25 * (f[g.flat(i, j)] + f[g.flat(mi, j)] + f[g.flat(i, mj)] + f[g.flat(mi, mj)]);
      }
    }
  }
  return out;
}

Field to_field(const GridPtr& grid, const std::vector<double>& f) {
  Field out(grid);
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
  return out;
}

std::vector<double> to_real(const Field& f) {
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

}  // namespace

RhoProfile solve_rho(const GroundState& gs, double tol, int max_iter) {
  const GridPtr& grid = gs.Q.grid_ptr();
  const int d = grid->dim();
  const double p = 1.0 + 4.0 / d;
  std::vector<double> potential(gs.Q.size());
  for (std::size_t i = 0; i < potential.size(); ++i) potential[i] = p * std::pow(std::abs(gs.Q[i].real()), p - 1.0);

  std::vector<double> rhs(gs.Q.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    auto x = grid->point(i);
    rhs[i] = -(x[0] * x[0] + x[1] * x[1]) * gs.Q[i].real();
  }
  rhs = even_part(*grid, rhs);

  LinearOp apply_lplus = [&](const std::vector<double>& f, std::vector<double>& out) {
    std::vector<double> fe = even_part(*grid, f);
    Field ff = to_field(grid, fe);
    Field lap = laplacian(ff);
    out.resize(fe.size());
    for (std::size_t i = 0; i < fe.size(); ++i) out[i] = -lap[i].real() + fe[i] - potential[i] * fe[i];
    out = even_part(*grid, out);
  };
  LinearOp apply_prec = [&](const std::vector<double>& f, std::vector<double>& out) {
    out = to_real(inverse_helmholtz(to_field(grid, f)));
  };

  KrylovResult kr = minres(apply_lplus, apply_prec, rhs, tol, max_iter);

  RhoProfile rp;
  rp.rho = to_field(grid, even_part(*grid, kr.x));
  rp.residual_history = kr.history;
  std::vector<double> check;
  apply_lplus(kr.x, check);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < check.size(); ++i) {
    num += (check[i] - rhs[i]) * (check[i] - rhs[i]);
    den += rhs[i] * rhs[i];
  }
  rp.residual = std::sqrt(num / den);
  if (!kr.converged || rp.residual > 1e-8) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "rho solve did not converge (relative residual %.3e after %d iterations)",
                  rp.residual, kr.iterations);
    throw ConvergenceError(msg, kr.history);
  }
  rp.radial = RadialProfile::from_field(rp.rho);
  return rp;
}

double measure_decay_rate(const Field& f, double r_min, double r_max, double floor) {
  double sr = 0.0, sl = 0.0, srr = 0.0, srl = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto x = f.grid().point(i);
    double r = std::hypot(x[0], x[1]);
    double a = std::abs(f[i]);
    if (r < r_min || r > r_max || a <= floor) continue;
    double l = std::log(a);
    sr += r;
    sl += l;
    srr += r * r;
    srl += r * l;
    ++count;
  }
  if (count < 2) throw Error("not enough samples above the floor to fit a decay rate");
  const double slope = (count * srl - sr * sl) / (count * srr - sr * sr);
  return -slope;
}

// ---------------------------------------------------------------------------
// Profiles and transforms

TransformResult deformed_radial(const RadialProfile& q, const ModParams& P, const GridPtr& grid) {
  if (!(P.lambda > 0.0)) throw Error("lambda must be positive");
  const int d = grid->dim();
  const double amp = std::pow(P.lambda, -0.5 * d);
  TransformResult out{Field(grid), false};
  for (std::size_t idx = 0; idx < grid->size(); ++idx) {
    auto x = grid->point(idx);
    double y0 = (x[0] - P.alpha[0]) / P.lambda;
    double y1 = d == 2 ? (x[1] - P.alpha[1]) / P.lambda : 0.0;
    double r2 = y0 * y0 + y1 * y1;
    double phase = P.beta[0] * y0 + (d == 2 ? P.beta[1] * y1 : 0.0) - 0.25 * P.gamma * r2 + P.theta;
    out.field[idx] = amp * q.value(std::sqrt(r2)) * std::polar(1.0, phase);
  }
  double max_shift = std::max(std::abs(P.alpha[0]), d == 2 ? std::abs(P.alpha[1]) : 0.0);
  double edge = (grid->half_length() - max_shift) / P.lambda;
  out.support_warning = q.tail_fraction(edge, d) > 1e-10;
  return out;
}

TransformResult deformed_profile(const GroundState& gs, const ModParams& P, const GridPtr& grid) {
  return deformed_radial(gs.radial, P, grid);
}

Field pseudo_conformal_ST(const GroundState& gs, double T, double t, const GridPtr& grid) {
  if (!(t < T)) throw Error("evaluated at/after blow-up time");
  return deformed_profile(gs, ModParams::pseudo_conformal(T, t), grid).field;
}

namespace {

// E[j][m] evaluates the trigonometric interpolant at the preimage of x_j.
std::vector<cplx> interpolation_matrix(const Grid& g, double scale, double shift, std::vector<char>& inside) {
  const int n = g.n();
  const double L = g.half_length();
  std::vector<cplx> E(std::size_t(n) * n);
  inside.assign(n, 0);
  for (int j = 0; j < n; ++j) {
    const double s = (g.coord(j) - shift) / scale;
    if (s < -L || s >= L) continue;
    inside[j] = 1;
    for (int m = 0; m < n; ++m) {
      const double k = g.wavenumbers()[m];
      const double arg = k * (s + L);
      E[std::size_t(j) * n + m] = m == n / 2 ? cplx(std::cos(arg) / n) : std::polar(1.0 / n, arg);
    }
  }
  return E;
}

void transform_line(const std::vector<cplx>& E, const std::vector<char>& inside, int n, std::vector<cplx>& line) {
  std::vector<cplx> hat(n), out(n, 0.0);
  fft::forward_1d(n, line, hat);
  for (int j = 0; j < n; ++j) {
    if (!inside[j]) continue;
    cplx s = 0.0;
    const cplx* row = &E[std::size_t(j) * n];
    for (int m = 0; m < n; ++m) s += row[m] * hat[m];
    out[j] = s;
  }
  line.swap(out);
}

}  // namespace

TransformResult resample_affine(const Field& u, double scale, std::array<double, 2> shift) {
  if (scale == 0.0 || !std::isfinite(scale)) throw Error("resampling scale must be finite and non-zero");
  const Grid& g = u.grid();
  const int n = g.n();
  const double L = g.half_length();
  TransformResult out{u, false};

  // Content whose image leaves the box is lost.
  double lost = 0.0, total = 0.0;
  for (std::size_t idx = 0; idx < u.size(); ++idx) {
    auto x = g.point(idx);
    double w = std::norm(u[idx]);
    total += w;
    for (int a = 0; a < g.dim(); ++a) {
      double img = scale * x[a] + shift[a];
      if (img < -L || img >= L) {
        lost += w;
        break;
      }
    }
  }
  out.support_warning = total > 0.0 && lost > 1e-10 * total;

  std::vector<char> inside;
  std::vector<cplx> line(n);
  if (g.dim() == 1) {
    auto E = interpolation_matrix(g, scale, shift[0], inside);
    for (int i = 0; i < n; ++i) line[i] = u[i];
    transform_line(E, inside, n, line);
    for (int i = 0; i < n; ++i) out.field[i] = line[i];
    return out;
  }
  auto Ey = interpolation_matrix(g, scale, shift[1], inside);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) line[j] = out.field[g.flat(i, j)];
    transform_line(Ey, inside, n, line);
    for (int j = 0; j < n; ++j) out.field[g.flat(i, j)] = line[j];
  }
  auto Ex = interpolation_matrix(g, scale, shift[0], inside);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) line[i] = out.field[g.flat(i, j)];
    transform_line(Ex, inside, n, line);
    for (int i = 0; i < n; ++i) out.field[g.flat(i, j)] = line[i];
  }
  return out;
}

TransformResult apply_symmetry(const Field& u, double lambda0, std::array<double, 2> beta0, double theta0,
                               std::array<double, 2> x0) {
  if (!(lambda0 > 0.0)) throw Error("lambda0 must be positive");
  const Grid& g = u.grid();
  const int d = g.dim();
  if (d == 1) {
    beta0[1] = 0.0;
    x0[1] = 0.0;
  }
  TransformResult out = resample_affine(u, lambda0, x0);
  const double amp = std::pow(lambda0, -0.5 * d);
  for (std::size_t idx = 0; idx < out.field.size(); ++idx) {
    auto x = g.point(idx);
    double phase = 0.5 * (beta0[0] * (x[0] - x0[0]) + beta0[1] * (x[1] - x0[1])) + theta0;
    out.field[idx] *= amp * std::polar(1.0, phase);
  }
  return out;
}

TransformResult pseudo_conformal_transform(const Field& u, double t) {
  if (t == 0.0 || !std::isfinite(t)) throw Error("pseudo-conformal transform requires t != 0");
  const Grid& g = u.grid();
  TransformResult out = resample_affine(u, -t, {0.0, 0.0});
  const cplx amp = std::pow(cplx(-t, 0.0), -0.5 * g.dim());
  for (std::size_t idx = 0; idx < out.field.size(); ++idx) {
    auto x = g.point(idx);
    out.field[idx] *= amp * std::polar(1.0, (x[0] * x[0] + x[1] * x[1]) / (4.0 * t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disk cache

namespace {

std::string cache_stem(const std::string& what, const Grid& g) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s_d%d_n%d_L%.17g", what.c_str(), g.dim(), g.n(), g.half_length());
  return buf;
}

void write_sidecar(const std::filesystem::path& path, const Grid& g, double residual, double extra_mass) {
  nlohmann::ordered_json j;
  j["d"] = g.dim();
  j["n"] = g.n();
  j["L"] = g.half_length();
  j["residual"] = residual;
  j["mass"] = extra_mass;
  std::ofstream(path) << j.dump(2) << "\n";
}

}  // namespace

GroundState cached_ground_state(const GridPtr& grid, const std::optional<std::filesystem::path>& cache_dir,
                                double tol) {
  if (cache_dir) {
    auto stem = *cache_dir / cache_stem("Q", *grid);
    auto snap = stem;
    snap += ".rnls";
    auto side = stem;
    side += ".json";
    if (std::filesystem::exists(snap) && std::filesystem::exists(side)) {
      Field Q = read_snapshot(snap);
      if (Q.grid() == *grid) {
        GroundState gs;
        gs.Q = Field(grid, std::vector<cplx>(Q.values().begin(), Q.values().end()));
        gs.dim = grid->dim();
        gs.residual = ground_state_residual(gs.Q);
        if (gs.residual < std::max(tol, 1e-10)) {
          gs.mass = mass(gs.Q);
          gs.radial = RadialProfile::from_field(gs.Q);
          return gs;
        }
      }
    }
  }
  GroundState gs = solve_ground_state(grid, tol);
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    auto stem = *cache_dir / cache_stem("Q", *grid);
    auto snap = stem;
    snap += ".rnls";
    auto side = stem;
    side += ".json";
    write_snapshot(snap, gs.Q);
    write_sidecar(side, *grid, gs.residual, gs.mass);
  }
  return gs;
}

RhoProfile cached_rho(const GroundState& gs, const std::optional<std::filesystem::path>& cache_dir, double tol) {
  const GridPtr& grid = gs.Q.grid_ptr();
  std::filesystem::path snap, side;
  if (cache_dir) {
    auto stem = *cache_dir / cache_stem("rho", *grid);
    snap = stem;
    snap += ".rnls";
    side = stem;
    side += ".json";
    if (std::filesystem::exists(snap) && std::filesystem::exists(side)) {
      Field rho = read_snapshot(snap);
      if (rho.grid() == *grid) {
        nlohmann::json j = nlohmann::json::parse(std::ifstream(side));
        RhoProfile rp;
        rp.rho = Field(grid, std::vector<cplx>(rho.values().begin(), rho.values().end()));
        rp.residual = j.at("residual").get<double>();
        rp.radial = RadialProfile::from_field(rp.rho);
        return rp;
      }
    }
  }
  RhoProfile rp = solve_rho(gs, tol);
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    write_snapshot(snap, rp.rho);
    write_sidecar(side, *grid, rp.residual, mass(rp.rho));
  }
  return rp;
}

}  // namespace rnls
