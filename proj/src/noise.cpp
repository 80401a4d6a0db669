#include "rnls/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "rnls/binary_io.hpp"
#include "rnls/error.hpp"
#include "rnls/philox.hpp"
#include "rnls/spectral.hpp"

namespace rnls {
namespace {

// m-th derivative of g(s) = s^3 exp(-c s).
double g_derivative(int m, double s, double c) {
  const double poly[4] = {s * s * s, 3 * s * s, 6 * s, 6.0};
  double sum = 0.0, binom = 1.0;
  for (int i = 0; i <= std::min(m, 3); ++i) {
    sum += binom * poly[i] * std::pow(-c, m - i);
    binom = binom * (m - i) / (i + 1);
  }
  return sum * std::exp(-c * s);
}

}  // namespace

NoiseBasis NoiseBasis::flat_poly_gauss(const GridPtr& grid, std::vector<double> amplitudes,
                                       std::vector<double> widths) {
  if (amplitudes.empty()) throw Error("noise basis needs N >= 1 modes");
  if (widths.size() != amplitudes.size()) throw Error("noise basis needs one width per amplitude");
  for (double w : widths)
    if (!(w > 0.0)) throw Error("noise widths must be positive");

  NoiseBasis nb;
  nb.grid_ = grid;
  nb.kind_ = BasisKind::flat_poly_gauss;
  nb.amps_ = std::move(amplitudes);
  nb.widths_ = std::move(widths);
  const int d = grid->dim();
  for (std::size_t k = 0; k < nb.amps_.size(); ++k) {
    const double a = nb.amps_[k];
    const double c = 1.0 / (nb.widths_[k] * nb.widths_[k]);
    Field phi(grid), lap(grid), bilap(grid);
    std::array<Field, 2> grad{Field(grid), Field(grid)};
    std::array<Field, 3> hess{Field(grid), Field(grid), Field(grid)};
    for (std::size_t idx = 0; idx < grid->size(); ++idx) {
      auto x = grid->point(idx);
      const double s = x[0] * x[0] + x[1] * x[1];
      double g[5];
      for (int m = 0; m < 5; ++m) g[m] = g_derivative(m, s, c);
      phi[idx] = a * g[0];
      for (int i = 0; i < d; ++i) grad[i][idx] = a * 2.0 * x[i] * g[1];
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) hess[i + j][idx] = a * (4.0 * x[i] * x[j] * g[2] + (i == j ? 2.0 * g[1] : 0.0));
      lap[idx] = a * (4.0 * s * g[2] + 2.0 * d * g[1]);
      const double h1 = (4.0 + 2.0 * d) * g[2] + 4.0 * s * g[3];
      const double h2 = (8.0 + 2.0 * d) * g[3] + 4.0 * s * g[4];
      bilap[idx] = a * (4.0 * s * h2 + 2.0 * d * h1);
    }
    nb.phi_.push_back(std::move(phi));
    nb.grad_.push_back(std::move(grad));
    nb.hess_.push_back(std::move(hess));
    nb.lap_.push_back(std::move(lap));
    nb.bilap_.push_back(std::move(bilap));
  }
  nb.finish();
  return nb;
}

NoiseBasis NoiseBasis::custom(std::vector<Field> modes) {
  if (modes.empty()) throw Error("noise basis needs N >= 1 modes");
  NoiseBasis nb;
  nb.grid_ = modes.front().grid_ptr();
  nb.kind_ = BasisKind::custom;
  const int d = nb.grid_->dim();
  for (auto& m : modes) {
    require_same_grid(m, modes.front());
    Field phi = m.real_part();
    std::array<Field, 2> grad{Field(nb.grid_), Field(nb.grid_)};
    std::array<Field, 3> hess{Field(nb.grid_), Field(nb.grid_), Field(nb.grid_)};
    for (int i = 0; i < d; ++i) grad[i] = partial(phi, i).real_part();
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) hess[i + j] = partial2(phi, i, j).real_part();
    Field lap = laplacian(phi).real_part();
    Field bilap = laplacian(lap).real_part();
    nb.amps_.push_back(phi.max_abs());
    nb.widths_.push_back(0.0);
    nb.phi_.push_back(std::move(phi));
    nb.grad_.push_back(std::move(grad));
    nb.hess_.push_back(std::move(hess));
    nb.lap_.push_back(std::move(lap));
    nb.bilap_.push_back(std::move(bilap));
  }
  nb.finish();
  return nb;
}

NoiseBasis NoiseBasis::make(BasisKind kind, int N, std::vector<double> amplitudes, const GridPtr& grid,
                            std::vector<double> widths) {
  if (N < 1) throw Error("noise basis needs N >= 1 modes");
  if (amplitudes.size() == 1 && N > 1) amplitudes.assign(N, amplitudes.front());
  if (int(amplitudes.size()) != N) throw Error("noise basis: amplitude count does not match N");
  if (kind == BasisKind::custom) throw Error("custom noise bases are built from explicit mode fields");
  if (widths.empty())
    for (int k = 0; k < N; ++k) widths.push_back(1.0 + 0.25 * k);
  return flat_poly_gauss(grid, std::move(amplitudes), std::move(widths));
}

void NoiseBasis::finish() {
  mu_ = Field(grid_);
  for (const auto& p : phi_)
    for (std::size_t i = 0; i < p.size(); ++i) mu_[i] += 0.5 * p[i].real() * p[i].real();
  report_ = check_assumptions(*this);
  if (!report_.a0_ok) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "noise basis violates assumption (A0) asymptotic flatness: %.3e >= %.1e",
                  report_.a0_max, a0_tol);
    throw Error(msg);
  }
  if (!report_.a1_ok) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "noise basis violates assumption (A1) flatness at the origin: %.3e >= %.1e",
                  report_.a1_max, a1_tol);
    throw Error(msg);
  }
}

double NoiseBasis::phi_value(int k, double x, double y) const {
  if (kind_ != BasisKind::flat_poly_gauss) throw Error("phi_value needs the built-in basis family");
  const double s = x * x + (dim() == 2 ? y * y : 0.0);
  return amps_.at(k) * g_derivative(0, s, 1.0 / (widths_[k] * widths_[k]));
}

double spectral_derivative_at_origin(const Field& f, std::array<int, 2> nu) {
  const Grid& g = f.grid();
  const int d = g.dim();
  const int n = g.n();
  if (d == 1) nu[1] = 0;
  Field hat = to_spectral(f.real_part());
  const double cutoff = 1e-15 * hat.max_abs();
  cplx sum = 0.0;
  for (std::size_t idx = 0; idx < hat.size(); ++idx) {
    if (std::abs(hat[idx]) < cutoff) continue;
    auto m = g.axis_indices(idx);
    cplx factor = 1.0;
    int sign_exp = 0;
    for (int a = 0; a < d; ++a) {
      const double k = nu[a] % 2 == 1 ? g.k_odd(m[a]) : g.wavenumbers()[m[a]];
      factor *= std::pow(cplx(0.0, k), nu[a]);
      sign_exp += m[a];
    }
    // The origin is sample n/2 on each axis: exp(i k_m L) = (-1)^m.
    sum += factor * hat[idx] * (sign_exp % 2 == 0 ? 1.0 : -1.0);
  }
  return sum.real() / std::pow(double(n), d);
}

AssumptionReport check_assumptions(const NoiseBasis& basis) {
  AssumptionReport r;
  const Grid& g = *basis.grid_ptr();
  const int d = g.dim();
  const double shell = 0.9 * g.half_length();
  for (int k = 0; k < basis.size(); ++k) {
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      auto x = g.point(idx);
      if (std::max(std::abs(x[0]), std::abs(x[1])) < shell) continue;
      const double weight = 1.0 + x[0] * x[0] + x[1] * x[1];
      double m = 0.0;
      for (int a = 0; a < d; ++a) m = std::max(m, std::abs(basis.grad(k, a)[idx]));
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) m = std::max(m, std::abs(basis.hess(k, a, b)[idx]));
      r.a0_max = std::max(r.a0_max, weight * m);
    }
    // Derivatives at 0 are certified relative to the mode's size.
    const double scale = std::max(1.0, basis.phi(k).max_abs());
    for (int total = 0; total <= 5; ++total) {
      for (int nx = 0; nx <= total; ++nx) {
        const int ny = total - nx;
        if (d == 1 && ny > 0) continue;
        r.a1_max = std::max(r.a1_max, std::abs(spectral_derivative_at_origin(basis.phi(k), {nx, ny})) / scale);
      }
    }
  }
  r.a0_ok = r.a0_max < NoiseBasis::a0_tol;
  r.a1_ok = r.a1_max < NoiseBasis::a1_tol;
  return r;
}

// ---------------------------------------------------------------------------
// Brownian lift

std::vector<double> uniform_mesh(double T, int M) {
  if (!(T > 0.0) || M < 1) throw Error("uniform mesh needs T > 0 and M >= 1");
  std::vector<double> mesh(M + 1);
  for (int i = 0; i <= M; ++i) mesh[i] = T * double(i) / double(M);
  return mesh;
}

namespace {

void check_mesh(const std::vector<double>& mesh) {
  if (mesh.size() < 2) throw Error("time mesh needs at least two points");
  for (std::size_t i = 1; i < mesh.size(); ++i)
    if (!(mesh[i] > mesh[i - 1])) throw Error("time mesh must be strictly increasing");
}

}  // namespace

BrownianLift zero_lift(int N, const std::vector<double>& mesh) {
  check_mesh(mesh);
  if (N < 1) throw Error("lift needs N >= 1 paths");
  BrownianLift L;
  L.mesh = mesh;
  L.N = N;
  L.B.assign(std::size_t(N) * mesh.size(), 0.0);
  L.Bb.assign(std::size_t(L.cells()) * N * N, 0.0);
  return L;
}

BrownianLift sample_brownian(int N, const std::vector<double>& mesh, int substeps, std::uint64_t seed) {
  if (substeps < 1) throw Error("substeps must be >= 1");
  BrownianLift L = zero_lift(N, mesh);
  L.seed = seed;
  L.substeps = substeps;
  const Philox4x32 gen(seed);
  const std::size_t np = mesh.size();
  std::vector<double> dW(std::size_t(N) * substeps), run(N);
  for (int i = 0; i < L.cells(); ++i) {
    const double dt = mesh[i + 1] - mesh[i];
    const double sh = std::sqrt(dt / substeps);
    for (int k = 0; k < N; ++k)
      for (int s = 0; s < substeps; ++s)
        dW[std::size_t(k) * substeps + s] = sh * gen.normal(std::uint32_t(k), std::uint64_t(i) * substeps + s);
    std::fill(run.begin(), run.end(), 0.0);
    for (int s = 0; s < substeps; ++s) {
      for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k)
          if (j != k) L.iterated_ref(j, k, i) += run[j] * dW[std::size_t(k) * substeps + s];
      for (int k = 0; k < N; ++k) run[k] += dW[std::size_t(k) * substeps + s];
    }
    for (int k = 0; k < N; ++k) {
      L.B[k * np + i + 1] = L.B[k * np + i] + run[k];
      const double inc = L.increment(k, i);
      L.iterated_ref(k, k, i) = 0.5 * (inc * inc - dt);
    }
  }
  return L;
}

std::vector<double> BrownianLift::values_at(double t) const {
  std::vector<double> v(N);
  const std::size_t np = mesh.size();
  if (t <= mesh.front()) {
    for (int k = 0; k < N; ++k) v[k] = B[k * np];
    return v;
  }
  if (t >= mesh.back()) {
    for (int k = 0; k < N; ++k) v[k] = B[k * np + np - 1];
    return v;
  }
  const auto it = std::upper_bound(mesh.begin(), mesh.end(), t);
  const std::size_t i = std::size_t(it - mesh.begin()) - 1;
  const double w = (t - mesh[i]) / (mesh[i + 1] - mesh[i]);
  for (int k = 0; k < N; ++k) v[k] = (1.0 - w) * B[k * np + i] + w * B[k * np + i + 1];
  return v;
}

BrownianLift BrownianLift::coarsen(int factor) const {
  if (factor < 1 || cells() % factor != 0) throw Error("coarsening factor must divide the number of cells");
  const int M = cells() / factor;
  std::vector<double> cmesh(M + 1);
  for (int I = 0; I <= M; ++I) cmesh[I] = mesh[std::size_t(I) * factor];
  BrownianLift out = zero_lift(N, cmesh);
  out.seed = seed;
  out.substeps = substeps * factor;
  const std::size_t np = mesh.size(), cp = cmesh.size();
  for (int k = 0; k < N; ++k)
    for (int I = 0; I <= M; ++I) out.B[k * cp + I] = B[k * np + std::size_t(I) * factor];
  std::vector<double> delta(N);
  for (int I = 0; I < M; ++I) {
    std::fill(delta.begin(), delta.end(), 0.0);
    for (int c = I * factor; c < (I + 1) * factor; ++c) {
      for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) out.iterated_ref(j, k, I) += iterated(j, k, c) + delta[j] * increment(k, c);
      for (int k = 0; k < N; ++k) delta[k] += increment(k, c);
    }
  }
  return out;
}

BrownianLift BrownianLift::slice(int first, int last) const {
  if (first < 0 || last > cells() || last <= first) throw Error("lift slice out of range");
  std::vector<double> sub(mesh.begin() + first, mesh.begin() + last + 1);
  BrownianLift out = zero_lift(N, sub);
  out.seed = seed;
  out.substeps = substeps;
  const std::size_t np = mesh.size(), sp = sub.size();
  for (int k = 0; k < N; ++k)
    for (std::size_t i = 0; i < sp; ++i) out.B[k * sp + i] = B[k * np + first + i] - B[k * np + first];
  std::copy(Bb.begin() + std::size_t(first) * N * N, Bb.begin() + std::size_t(last) * N * N, out.Bb.begin());
  return out;
}

void BrownianLift::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open lift file for writing: " + path.string());
  nlohmann::ordered_json h;
  h["format"] = "rnls-lift";
  h["version"] = 1;
  h["N"] = N;
  h["M"] = cells();
  h["seed"] = seed;
  h["substeps"] = substeps;
  os << h.dump() << '\n';
  for (double v : mesh) binary::put_le(os, v);
  for (double v : B) binary::put_le(os, v);
  for (double v : Bb) binary::put_le(os, v);
  if (!os) throw Error("failed writing lift file: " + path.string());
}

BrownianLift BrownianLift::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open lift file: " + path.string());
  std::string line;
  std::getline(is, line);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error("lift file has no JSON header: " + path.string());
  }
  if (h.value("format", "") != "rnls-lift" || h.value("version", 0) != 1)
    throw Error("unsupported lift file: " + path.string());
  const int N = h.at("N").get<int>();
  const int M = h.at("M").get<int>();
  std::vector<double> mesh(M + 1);
  for (auto& v : mesh) v = binary::get_le<double>(is, "lift file");
  BrownianLift L = zero_lift(N, mesh);
  L.seed = h.at("seed").get<std::uint64_t>();
  L.substeps = h.at("substeps").get<int>();
  for (auto& v : L.B) v = binary::get_le<double>(is, "lift file");
  for (auto& v : L.Bb) v = binary::get_le<double>(is, "lift file");
  return L;
}

double holder_norm(const std::vector<double>& mesh, const std::vector<double>& x, double alpha) {
  if (mesh.size() != x.size()) throw Error("path and mesh sizes differ");
  double best = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      best = std::max(best, std::abs(x[j] - x[i]) / std::pow(mesh[j] - mesh[i], alpha));
  return best;
}

double holder_exponent(const std::vector<double>& mesh, const std::vector<double>& x) {
  if (mesh.size() != x.size()) throw Error("path and mesh sizes differ");
  const std::size_t M = x.size() - 1;
  std::vector<double> lx, ly;
  for (std::size_t lag = 1; lag <= M / 4; lag *= 2) {
    double m = 0.0, h = 0.0;
    for (std::size_t i = 0; i + lag <= M; ++i) {
      m = std::max(m, std::abs(x[i + lag] - x[i]));
      h = std::max(h, mesh[i + lag] - mesh[i]);
    }
    if (m <= 0.0) continue;
    lx.push_back(std::log(h));
    ly.push_back(std::log(m));
  }
  if (lx.size() < 2) throw Error("path too short for a Hoelder exponent fit");
  const double n = double(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Coefficient fields

Field noise_potential(const NoiseBasis& basis, const std::vector<double>& Bvals) {
  if (int(Bvals.size()) != basis.size()) throw Error("need one B value per noise mode");
  Field psi(basis.grid_ptr());
  for (int k = 0; k < basis.size(); ++k)
    if (Bvals[k] != 0.0) psi += basis.phi(k) * cplx(Bvals[k]);
  return psi;
}

NoiseFields noise_fields(const NoiseBasis& basis, const std::vector<double>& Bvals) {
  const GridPtr& g = basis.grid_ptr();
  const int d = g->dim();
  NoiseFields nf{Field(g), {}, Field(g), basis.mu()};
  std::vector<Field> dpsi(d, Field(g));
  Field lap_psi(g);
  Field psi = noise_potential(basis, Bvals);
  for (int k = 0; k < basis.size(); ++k) {
    for (int a = 0; a < d; ++a) dpsi[a] += basis.grad(k, a) * cplx(Bvals[k]);
    lap_psi += basis.lap(k) * cplx(Bvals[k]);
  }
  const cplx I(0.0, 1.0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    nf.W[i] = I * psi[i].real();
    double grad2 = 0.0;
    for (int a = 0; a < d; ++a) grad2 += dpsi[a][i].real() * dpsi[a][i].real();
    nf.c[i] = cplx(-grad2, lap_psi[i].real());
  }
  for (int a = 0; a < d; ++a) nf.b.push_back(dpsi[a] * (2.0 * I));
  return nf;
}

NoiseFields noise_fields(const NoiseBasis& basis, const BrownianLift& lift, int t_index) {
  if (t_index < 0 || t_index > lift.cells()) throw Error("time index outside the lift mesh");
  if (lift.N != basis.size()) throw Error("lift and basis have different numbers of modes");
  std::vector<double> Bv(lift.N);
  for (int k = 0; k < lift.N; ++k) Bv[k] = lift.at(k, t_index);
  return noise_fields(basis, Bv);
}

}  // namespace rnls
