#include "rnls/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "rnls/error.hpp"
#include "rnls/philox.hpp"
#include "rnls/spectral.hpp"

namespace rnls {

namespace {

// Quintic Hermite on [0, 1] through (value, slope, curvature) at both ends.
struct Quintic {
  std::array<double, 6> c{};

  Quintic(double y0, double d0, double s0, double y1, double d1, double s1) {
    static const double H[6][6] = {
        {1, 0, 0, -10, 15, -6},   {0, 1, 0, -6, 8, -3},     {0, 0, 0.5, -1.5, 1.5, -0.5},
        {0, 0, 0, 10, -15, 6},    {0, 0, 0, -4, 7, -3},     {0, 0, 0, 0.5, -1, 0.5}};
    const double w[6] = {y0, d0, s0, y1, d1, s1};
    for (int b = 0; b < 6; ++b)
      for (int p = 0; p < 6; ++p) c[p] += w[b] * H[b][p];
  }
  double value(double s) const {
    double v = 0.0;
    for (int p = 5; p >= 0; --p) v = v * s + c[p];
    return v;
  }
  double slope(double s) const {
    double v = 0.0;
    for (int p = 5; p >= 1; --p) v = v * s + p * c[p];
    return v;
  }
};

// psi'(r) = r h(r) on (1, 2) with h = 1 - a (r - 1)^p decreasing from 1 to
// (2 - e^{-2}) / 2 and matching the slope of (2 - e^{-r}) / r at r = 2.
struct PsiBridge {
  double a, p;
  PsiBridge() {
    const double h2 = (2.0 - std::exp(-2.0)) / 2.0;
    const double dh2 = std::exp(-2.0) / 2.0 - (2.0 - std::exp(-2.0)) / 4.0;
    a = 1.0 - h2;
    p = -dh2 / a;
  }
};

const PsiBridge& psi_bridge() {
  static const PsiBridge b;
  return b;
}

const Quintic& cutoff_bridge() {
  static const Quintic q(0.0, 0.0, 0.0, 2.0, 1.0, 0.0);
  return q;
}

Field coordinate(const GridPtr& g, int axis, double shift = 0.0) {
  return Field::sample(g, [axis, shift](double x, double y) { return (axis == 0 ? x : y) - shift; });
}

double rel(const Field& err, const Field& ref) { return norm_l2(err) / norm_l2(ref); }

std::vector<double> cutoff_weights(const Grid& g, double A) {
  std::vector<double> w(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) {
    auto x = g.point(q);
    w[q] = coercivity_cutoff(std::hypot(x[0], x[1]) / A);
  }
  return w;
}

// Derivative at x_k of the parabola through three samples.
double deriv3(const double* x, const double* f, int k) {
  const double xk = x[k];
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    double num = 0.0, den = 1.0;
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      den *= x[a] - x[b];
      double p = 1.0;
      for (int c = 0; c < 3; ++c)
        if (c != a && c != b) p *= xk - x[c];
      num += p;
    }
    s += f[a] * num / den;
  }
  return s;
}

}  // namespace

double KernelIdentityReport::max() const {
  return std::max({lplus_gradQ, lplus_LambdaQ, lplus_rho, lminus_Q, lminus_xQ, lminus_x2Q});
}

LinearizedOps::LinearizedOps(const GroundState& gs, const RhoProfile& rho) : grid_(gs.Q.grid_ptr()), Q_(gs.Q) {
  const int d = grid_->dim();
  if (!rho.rho.empty() && rho.rho.grid() == *grid_)
    rho_ = rho.rho;
  else
    rho_ = deformed_radial(rho.radial, ModParams{}, grid_).field;
  V_ = Field(grid_);
  for (std::size_t q = 0; q < Q_.size(); ++q) V_[q] = std::pow(std::abs(Q_[q]), 4.0 / d);

  Field r2(grid_);
  real_dirs_.push_back(Q_);
  for (int a = 0; a < d; ++a) {
    Field xa = coordinate(grid_, a);
    real_dirs_.push_back(xa * Q_);
    r2 += xa * xa;
  }
  real_dirs_.push_back(r2 * Q_);
  for (int a = 0; a < d; ++a) imag_dirs_.push_back(partial(Q_, a));
  imag_dirs_.push_back(Lambda(Q_));
  imag_dirs_.push_back(rho_);
}

Field LinearizedOps::Lambda(const Field& f) const {
  const int d = dim();
  Field out = f * cplx(0.5 * d);
  for (int a = 0; a < d; ++a) out += coordinate(grid_, a) * partial(f, a);
  return out;
}

Field LinearizedOps::apply(LinearOp which, const Field& f) const {
  require_same_grid(f, Q_);
  const double k = which == LinearOp::plus ? 1.0 + 4.0 / dim() : 1.0;
  Field out = laplacian(f) * cplx(-1.0);
  for (std::size_t q = 0; q < f.size(); ++q) out[q] += f[q] - k * V_[q].real() * f[q];
  return out;
}

KernelIdentityReport LinearizedOps::kernel_identities() const {
  const int d = dim();
  KernelIdentityReport r;
  const Field LQ = Lambda(Q_);
  const Field& x2Q = real_dirs_.back();
  for (int a = 0; a < d; ++a) {
    const Field& dQ = imag_dirs_[a];
    r.lplus_gradQ = std::max(r.lplus_gradQ, rel(apply(LinearOp::plus, dQ), dQ));
    r.lminus_xQ =
        std::max(r.lminus_xQ, rel(apply(LinearOp::minus, real_dirs_[1 + a]) + dQ * cplx(2.0), dQ * cplx(2.0)));
  }
  r.lplus_LambdaQ = rel(apply(LinearOp::plus, LQ) + Q_ * cplx(2.0), Q_ * cplx(2.0));
  r.lplus_rho = rel(apply(LinearOp::plus, rho_) + x2Q, x2Q);
  r.lminus_Q = rel(apply(LinearOp::minus, Q_), Q_);
  r.lminus_x2Q = rel(apply(LinearOp::minus, x2Q) + LQ * cplx(4.0), LQ * cplx(4.0));
  return r;
}

Field apply_L(LinearOp which, const Field& f, const LinearizedOps& ops) { return ops.apply(which, f); }

double coercivity_cutoff(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return std::exp(-r);
  return std::exp(-cutoff_bridge().value(r - 1.0));
}

double coercivity_form(const Field& f, const LinearizedOps& ops, std::optional<double> A) {
  const Field f1 = f.real_part(), f2 = f.imag_part();
  if (!A) return inner_re(ops.apply(LinearOp::plus, f1), f1) + inner_re(ops.apply(LinearOp::minus, f2), f2);
  if (!(*A > 0.0)) throw Error("cutoff scale A must be positive");
  const Grid& g = f.grid();
  const int d = g.dim();
  const auto phi = cutoff_weights(g, *A);
  const auto grad = gradient(f);
  const Field& Q = ops.Q();
  double s = 0.0;
  for (std::size_t q = 0; q < f.size(); ++q) {
    double gq = 0.0;
    for (const auto& da : grad) gq += std::norm(da[q]);
    const double V = std::pow(std::abs(Q[q]), 4.0 / d);
    const double a = f1[q].real(), b = f2[q].real();
    s += gq * phi[q] + a * a + b * b - (1.0 + 4.0 / d) * V * a * a - V * b * b;
  }
  return s * g.cell_volume();
}

double coercivity_norm(const Field& f, std::optional<double> A) {
  if (!A) return h1_norm_squared(f);
  if (!(*A > 0.0)) throw Error("cutoff scale A must be positive");
  const Grid& g = f.grid();
  const auto phi = cutoff_weights(g, *A);
  const auto grad = gradient(f);
  double s = 0.0;
  for (std::size_t q = 0; q < f.size(); ++q) {
    double gq = std::norm(f[q]);
    for (const auto& da : grad) gq += std::norm(da[q]);
    s += gq * phi[q];
  }
  return s * g.cell_volume();
}

Field project_onto_K(const Field& f, const LinearizedOps& ops) {
  auto project = [](Field v, const std::vector<Field>& dirs) {
    std::vector<Field> basis;
    for (const auto& d : dirs) {
      Field e = d;
      for (const auto& b : basis) e -= b * cplx(inner_re(e, b));
      const double n = norm_l2(e);
      if (n > 0.0) basis.push_back(e * cplx(1.0 / n));
    }
    for (const auto& b : basis) v -= b * cplx(inner_re(v, b));
    return v;
  };
  Field f1 = project(f.real_part(), ops.real_directions());
  Field f2 = project(f.imag_part(), ops.imag_directions());
  return f1 + f2 * cplx(0.0, 1.0);
}

std::vector<double> k_residuals(const Field& f, const LinearizedOps& ops) {
  std::vector<double> r;
  const Field f1 = f.real_part(), f2 = f.imag_part();
  for (const auto& d : ops.real_directions()) r.push_back(inner_re(f1, d));
  for (const auto& d : ops.imag_directions()) r.push_back(inner_re(f2, d));
  return r;
}

Field random_test_field(const GridPtr& grid, std::uint64_t seed, int index) {
  const Philox4x32 rng(seed);
  const int d = grid->dim();
  const auto stream = std::uint32_t(index);
  std::uint64_t k = 0;
  auto uniform = [&](double lo, double hi) {
    const double z = rng.normal(stream, k++);
    return lo + (hi - lo) * 0.5 * std::erfc(-z / std::numbers::sqrt2);
  };
  Field f(grid);
  for (int b = 0; b < 4; ++b) {
    const double cx = uniform(-3.0, 3.0), cy = d == 2 ? uniform(-3.0, 3.0) : 0.0;
    const double s = uniform(0.5, 2.0);
    const double kx = uniform(-1.5, 1.5), ky = d == 2 ? uniform(-1.5, 1.5) : 0.0;
    const cplx a(rng.normal(stream, k), rng.normal(stream, k + 1));
    k += 2;
    f += Field::sample(grid, [&](double x, double y) {
      const double r2 = (x - cx) * (x - cx) + (d == 2 ? (y - cy) * (y - cy) : 0.0);
      return a * std::exp(-r2 / (2.0 * s * s)) * std::polar(1.0, kx * x + ky * y);
    });
  }
  return f;
}

CoercivityStudy coercivity_study(const LinearizedOps& ops, int trials, std::uint64_t seed, std::optional<double> A) {
  if (trials < 1) throw Error("need at least one trial");
  CoercivityStudy st;
  st.nu_hat = std::numeric_limits<double>::infinity();
  for (int i = 0; i < trials; ++i) {
    Field f = project_onto_K(random_test_field(ops.grid(), seed, i), ops);
    const double r = coercivity_form(f, ops, A) / coercivity_norm(f, A);
    st.ratios.push_back(r);
    st.nu_hat = std::min(st.nu_hat, r);
    const double n = norm_l2(f);
    for (double k : k_residuals(f, ops)) st.max_k_residual = std::max(st.max_k_residual, std::abs(k) / n);
  }
  return st;
}

std::vector<double> orthogonality_functionals(const Field& u, const ModParams& P, const GroundState& gs,
                                              const RhoProfile& rho) {
  const GridPtr& g = u.grid_ptr();
  const int d = g->dim();
  const Field w = deformed_profile(gs, P, g).field;
  const Field rt = deformed_radial(rho.radial, P, g).field;
  const Field R = u - w;
  const auto grad = gradient(w);
  std::vector<double> F;
  Field r2(g), Lw = w * cplx(0.5 * d);
  for (int a = 0; a < d; ++a) {
    Field xa = coordinate(g, a, P.alpha[a]);
    F.push_back(inner(xa * w, R).real());
    r2 += xa * xa;
    Lw += xa * grad[a];
  }
  F.push_back(inner(r2 * w, R).real());
  F.push_back(inner(Lw, R).imag());
  for (int a = 0; a < d; ++a) F.push_back(inner(grad[a], R).imag());
  F.push_back(inner(rt, R).imag());
  return F;
}

DecompositionResult decompose(const Field& u, const ModParams& P_init, const GroundState& gs, const RhoProfile& rho,
                              const DecomposeOptions& opt) {
  const int d = u.grid().dim();
  if (gs.dim != d) throw Error("ground state and input have different dimensions");
  if (!P_init.valid()) throw Error("initial modulation parameters are invalid");
  const int m = 2 * d + 3;
  const double tol = opt.tol_factor * gs.mass;

  auto eval = [&](const std::vector<double>& p) {
    auto F = orthogonality_functionals(u, ModParams::from_vector(p, d), gs, rho);
    return Eigen::Map<Eigen::VectorXd>(F.data(), m).eval();
  };

  std::vector<double> p = P_init.to_vector(d);
  Eigen::VectorXd F = eval(p);
  DecompositionResult res;
  res.residual_trace.push_back(F.cwiseAbs().maxCoeff());
  int it = 0;
  for (; res.residual_trace.back() >= tol; ++it) {
    if (it >= opt.max_iter)
      throw ConvergenceError("decomposition Newton did not converge within " + std::to_string(opt.max_iter) +
                                 " iterations",
                             res.residual_trace);
    const double lam = p[0];
    Eigen::MatrixXd J(m, m);
    for (int i = 0; i < m; ++i) {
      const double h = opt.fd_step * (i <= d ? lam : 1.0);
      auto q = p;
      q[i] += h;
      J.col(i) = (eval(q) - F) / h;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& sv = svd.singularValues();
    if (!(sv(m - 1) > 1e-12 * sv(0)))
      throw ConvergenceError("outside decomposition basin: Jacobian is near-singular", res.residual_trace);
    Eigen::VectorXd delta = J.colPivHouseholderQr().solve(-F);
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30 && !accepted; ++k, step *= 0.5) {
      auto q = p;
      for (int i = 0; i < m; ++i) q[i] += step * delta(i);
      if (!(q[0] > 0.0)) continue;
      Eigen::VectorXd Fq = eval(q);
      if (Fq.allFinite() && Fq.norm() < F.norm()) {
        p = q;
        F = Fq;
        accepted = true;
      }
    }
    if (!accepted) throw ConvergenceError("decomposition Newton diverged", res.residual_trace);
    res.residual_trace.push_back(F.cwiseAbs().maxCoeff());
  }
  res.P = ModParams::from_vector(p, d);
  res.newton_iters = it;
  res.ortho_residuals.assign(F.data(), F.data() + m);
  TransformResult w = deformed_profile(gs, res.P, u.grid_ptr());
  res.w = w.field;
  res.support_warning = w.support_warning;
  res.R = u - res.w;
  TransformResult eps = resample_affine(res.R, 1.0 / res.P.lambda,
                                        {-res.P.alpha[0] / res.P.lambda, -res.P.alpha[1] / res.P.lambda});
  res.epsilon = eps.field * std::polar(std::pow(res.P.lambda, 0.5 * d), -res.P.theta);
  res.support_warning = res.support_warning || eps.support_warning;
  return res;
}

std::vector<ModParams> unwrap_theta(std::vector<ModParams> P) {
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t i = 1; i < P.size(); ++i) {
    double pred = P[i - 1].theta;
    if (i >= 2) pred += P[i - 1].theta - P[i - 2].theta;
    P[i].theta += tau * std::round((pred - P[i].theta) / tau);
  }
  return P;
}

std::vector<ModVectorSample> mod_vector(const std::vector<double>& t, const std::vector<ModParams>& P_in, int dim) {
  if (t.size() != P_in.size()) throw Error("need one parameter set per time");
  if (t.size() < 3) throw Error("mod_vector needs at least 3 samples");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw Error("sample times must increase");
  const auto P = unwrap_theta(P_in);
  const int m = 2 * dim + 3;
  std::vector<std::vector<double>> v;
  for (const auto& p : P) v.push_back(p.to_vector(dim));

  std::vector<ModVectorSample> out;
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : (i == n - 1 ? n - 3 : i - 1);
    const int k = int(i - a);
    std::vector<double> dv(m);
    for (int c = 0; c < m; ++c) {
      const double f[3] = {v[a][c], v[a + 1][c], v[a + 2][c]};
      dv[c] = deriv3(&t[a], f, k);
    }
    ModVectorSample s;
    s.t = t[i];
    s.P_dot.lambda = dv[0];
    for (int j = 0; j < dim; ++j) {
      s.P_dot.alpha[j] = dv[1 + j];
      s.P_dot.beta[j] = dv[1 + dim + j];
    }
    s.P_dot.gamma = dv[1 + 2 * dim];
    s.P_dot.theta = dv[2 + 2 * dim];
    const auto& p = P[i];
    const double l = p.lambda, l2 = l * l;
    double c2 = 0.0, c3 = 0.0, b2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      c2 += std::pow(l * s.P_dot.alpha[j] - 2.0 * p.beta[j], 2);
      c3 += std::pow(l2 * s.P_dot.beta[j] + p.gamma * p.beta[j], 2);
      b2 += p.beta[j] * p.beta[j];
    }
    s.components = {std::abs(l * s.P_dot.lambda + p.gamma), std::abs(l2 * s.P_dot.gamma + p.gamma * p.gamma),
                    std::sqrt(c2), std::sqrt(c3), std::abs(l2 * s.P_dot.theta - 1.0 - b2)};
    s.mod = 0.0;
    for (double c : s.components) s.mod += c;
    out.push_back(s);
  }
  return out;
}

EtaResult profile_residual_eta(const ModParams& P, const ModParams& P_dot, const GroundState& gs,
                               const GridPtr& grid, const NoiseDriver& noise, double t) {
  const int d = grid->dim();
  const Field w = deformed_profile(gs, P, grid).field;
  const auto grad = gradient(w);
  const cplx I(0.0, 1.0);
  Field eta = laplacian(w);
  Field radial_part = w * cplx(0.5 * d);
  std::vector<Field> y;
  for (int a = 0; a < d; ++a) {
    Field xa = coordinate(grid, a, P.alpha[a]);
    radial_part += xa * grad[a];
    y.push_back(xa * cplx(1.0 / P.lambda));
  }
  for (std::size_t q = 0; q < w.size(); ++q) {
    cplx dtw = -P_dot.lambda / P.lambda * radial_part[q];
    double phase = P_dot.theta;
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      dtw -= P_dot.alpha[a] * grad[a][q];
      const double ya = y[a][q].real();
      phase += P_dot.beta[a] * ya;
      r2 += ya * ya;
    }
    phase -= 0.25 * P_dot.gamma * r2;
    dtw += I * phase * w[q];
    eta[q] += I * dtw + std::pow(std::abs(w[q]), 4.0 / d) * w[q];
  }
  if (noise.active()) {
    NoiseFields nf = noise_fields(*noise.basis, noise.lift->values_at(t));
    for (std::size_t q = 0; q < w.size(); ++q) {
      cplx s = nf.c[q] * w[q];
      for (int a = 0; a < d; ++a) s += nf.b[a][q] * grad[a][q];
      eta[q] += s;
    }
  }
  EtaResult r{eta, norm_l2(eta)};
  return r;
}

std::array<double, 2> chi_psi_prime(double r) {
  if (r < 0.0) throw Error("radius must be non-negative");
  if (r <= 1.0) return {r, 1.0};
  if (r >= 2.0) return {2.0 - std::exp(-r), std::exp(-r)};
  const auto& b = psi_bridge();
  const double s = r - 1.0;
  const double h = 1.0 - b.a * std::pow(s, b.p);
  const double dh = -b.a * b.p * std::pow(s, b.p - 1.0);
  return {r * h, h + r * dh};
}

double generalized_energy(const Field& R, const Field& w, const ModParams& P, double A) {
  require_same_grid(R, w);
  if (!(A > 0.0)) throw Error("cutoff scale A must be positive");
  if (!(P.lambda > 0.0)) throw Error("lambda must be positive");
  const Grid& g = R.grid();
  const int d = g.dim();
  const double p = 4.0 / d;
  const double cF = double(d) / (2.0 * d + 4.0);
  auto F = [&](cplx z) { return cF * std::pow(std::abs(z), 2.0 + p); };
  const auto grad = gradient(R);
  double s = 0.0;
  for (std::size_t q = 0; q < R.size(); ++q) {
    double gr = 0.0;
    for (const auto& da : grad) gr += std::norm(da[q]);
    s += 0.5 * (gr + std::norm(R[q]) / (P.lambda * P.lambda));
    const cplx u = w[q] + R[q];
    const cplx fw = std::pow(std::abs(w[q]), p) * w[q];
    s -= F(u) - F(w[q]) - (fw * std::conj(R[q])).real();
    if (P.gamma != 0.0) {
      auto x = g.point(q);
      double y[2] = {(x[0] - P.alpha[0]) / P.lambda, d == 2 ? (x[1] - P.alpha[1]) / P.lambda : 0.0};
      const double r = std::hypot(y[0], y[1]);
      if (r > 0.0) {
        const double radial = A * chi_psi_prime(r / A)[0] / r;
        cplx dot = 0.0;
        for (int a = 0; a < d; ++a) dot += radial * y[a] * grad[a][q];
        s += P.gamma / (2.0 * P.lambda) * (dot * std::conj(R[q])).imag();
      }
    }
  }
  return s * g.cell_volume();
}

std::vector<ModTrackRow> track_modulation(const std::vector<std::pair<double, Field>>& snapshots,
                                          const ModParams& P_init, const GroundState& gs, const RhoProfile& rho,
                                          double A) {
  std::vector<ModTrackRow> rows;
  ModParams guess = P_init;
  std::vector<double> times;
  std::vector<ModParams> Ps;
  for (const auto& [t, u] : snapshots) {
    DecompositionResult dec = decompose(u, guess, gs, rho);
    guess = dec.P;
    ModTrackRow r;
    r.t = t;
    r.P = dec.P;
    r.eps_l2 = norm_l2(dec.R);
    r.eps_grad = dec.P.lambda * gradient_norm(dec.R);
    r.I = generalized_energy(dec.R, dec.w, dec.P, A);
    rows.push_back(r);
    times.push_back(t);
    Ps.push_back(dec.P);
  }
  if (rows.size() >= 3) {
    auto mv = mod_vector(times, Ps, gs.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].mod = mv[i].mod;
  } else {
    for (auto& r : rows) r.mod = std::numeric_limits<double>::quiet_NaN();
  }
  return rows;
}

void write_mod_track_csv(const std::filesystem::path& path, const std::vector<ModTrackRow>& rows, int dim) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << (dim == 1 ? "t,lambda,alpha,beta,gamma,theta,Mod,eps_l2,eps_grad,I\n"
                   : "t,lambda,alpha_x,alpha_y,beta_x,beta_y,gamma,theta,Mod,eps_l2,eps_grad,I\n");
  char buf[64];
  auto put = [&](double v, bool last = false) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << (last ? '\n' : ',');
  };
  for (const auto& r : rows) {
    put(r.t);
    put(r.P.lambda);
    for (int a = 0; a < dim; ++a) put(r.P.alpha[a]);
    for (int a = 0; a < dim; ++a) put(r.P.beta[a]);
    put(r.P.gamma);
    put(r.P.theta);
    put(r.mod);
    put(r.eps_l2);
    put(r.eps_grad);
    put(r.I, true);
  }
}

}  // namespace rnls
