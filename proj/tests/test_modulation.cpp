#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles/radial_shooting.hpp"
#include "rnls/error.hpp"
#include "rnls/modulation.hpp"
#include "rnls/spectral.hpp"

using namespace rnls;

namespace {

struct Setup {
  GroundState gs;
  RhoProfile rho;
};

const Setup& wide_1d() {
  static const Setup s = [] {
    Setup o;
    o.gs = solve_ground_state(make_grid(1, 4096, 40.0));
    o.rho = solve_rho(o.gs);
    return o;
  }();
  return s;
}

const LinearizedOps& ops_1d() {
  static const LinearizedOps ops(wide_1d().gs, wide_1d().rho);
  return ops;
}

ModParams perturbed(ModParams P, double f) {
  P.lambda *= 1.0 + f;
  P.alpha[0] += f * P.lambda;
  P.beta[0] += f;
  P.gamma *= 1.0 - f;
  P.theta *= 1.0 + f;
  return P;
}

double wrap(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("kernel identities in one dimension") {
  auto r = ops_1d().kernel_identities();
  CHECK(r.lplus_gradQ < 1e-8);
  CHECK(r.lminus_Q < 1e-8);
  CHECK(r.lplus_LambdaQ < 1e-6);
  CHECK(r.lminus_xQ < 1e-6);
  CHECK(r.lminus_x2Q < 1e-6);
  CHECK(r.lplus_rho < 1e-8);
}

TEST_CASE("linearized operators are self-adjoint") {
  const auto& ops = ops_1d();
  Field f = random_test_field(ops.grid(), 3, 0).real_part();
  Field g = random_test_field(ops.grid(), 3, 1).real_part();
  for (LinearOp w : {LinearOp::plus, LinearOp::minus}) {
    const double a = inner_re(ops.apply(w, f), g), b = inner_re(f, ops.apply(w, g));
    CHECK(std::abs(a - b) < 1e-11 * norm_l2(ops.apply(w, f)) * norm_l2(g));
  }
}

TEST_CASE("apply_L against the closed-form ground state") {
  auto g = make_grid(1, 4096, 30.0);
  GroundState gs;
  gs.Q = Field::sample(g, [](double x) { return oracle::ground_state_1d(x); });
  gs.dim = 1;
  gs.radial = RadialProfile::from_field(gs.Q);
  RhoProfile rho;
  rho.radial = gs.radial;
  LinearizedOps ops(gs, rho);
  CHECK(norm_l2(apply_L(LinearOp::minus, gs.Q, ops)) / norm_l2(gs.Q) < 1e-8);
}

TEST_CASE("coercivity form on kernel directions and projected fields") {
  const auto& ops = ops_1d();
  Field dQ = partial(ops.Q(), 0);
  CHECK(std::abs(coercivity_form(dQ, ops)) < 1e-8 * h1_norm_squared(dQ));
  Field iQ = ops.Q() * cplx(0.0, 1.0);
  CHECK(std::abs(coercivity_form(iQ, ops)) < 1e-8 * h1_norm_squared(iQ));

  auto st = coercivity_study(ops, 20, 11);
  CHECK(st.nu_hat > 0.0);
  CHECK(st.max_k_residual < 1e-12);
  auto loc = coercivity_study(ops, 20, 11, 5.0);
  CHECK(loc.nu_hat > 0.0);
}

TEST_CASE("cutoffs are smooth and satisfy their side conditions") {
  double prev = 1.0;
  for (int i = 0; i <= 4000; ++i) {
    const double r = 4.0 * i / 4000.0;
    const double phi = coercivity_cutoff(r);
    CHECK(phi > 0.0);
    CHECK(phi <= 1.0);
    CHECK(phi <= prev + 1e-15);
    prev = phi;
    auto p = chi_psi_prime(r);
    CHECK(p[1] > 0.0);
    if (r > 0.0) CHECK(p[0] / r - p[1] >= -1e-14);
  }
  for (double r : {1.0, 2.0}) {
    const double h = 1e-7;
    CHECK(chi_psi_prime(r - h)[0] == doctest::Approx(chi_psi_prime(r + h)[0]).epsilon(1e-6));
    CHECK(chi_psi_prime(r - h)[1] == doctest::Approx(chi_psi_prime(r + h)[1]).epsilon(1e-6));
    CHECK(coercivity_cutoff(r - h) == doctest::Approx(coercivity_cutoff(r + h)).epsilon(1e-6));
  }
}

TEST_CASE("decompose recovers pseudo-conformal parameters") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  for (double t : {0.0, 0.5}) {
    const ModParams exact = ModParams::pseudo_conformal(1.0, t);
    Field u = pseudo_conformal_ST(s.gs, 1.0, t, g);
    auto res = decompose(u, perturbed(exact, 0.1), s.gs, s.rho);
    CHECK(res.newton_iters <= 10);
    CHECK(res.P.lambda == doctest::Approx(exact.lambda).epsilon(1e-8));
    CHECK(std::abs(res.P.alpha[0]) < 1e-8);
    CHECK(std::abs(res.P.beta[0]) < 1e-8);
    CHECK(res.P.gamma == doctest::Approx(exact.gamma).epsilon(1e-8));
    CHECK(std::abs(wrap(res.P.theta - exact.theta)) < 1e-8);
    for (double r : res.ortho_residuals) CHECK(std::abs(r) < 1e-10 * s.gs.mass);
    CHECK(norm_l2(res.w + res.R - u) < 1e-12);
  }
}

TEST_CASE("decompose of an exact deformed profile") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  ModParams P;
  P.lambda = 0.8;
  P.alpha = {0.3, 0.0};
  P.beta = {0.2, 0.0};
  P.gamma = 0.4;
  P.theta = 0.7;
  Field u = deformed_profile(s.gs, P, g).field;
  auto res = decompose(u, P, s.gs, s.rho);
  CHECK(res.newton_iters <= 3);
  CHECK(res.epsilon.max_abs() < 1e-12);

  // Phase rotation with the matching theta shift leaves the residuals unchanged.
  ModParams Pb = perturbed(P, 0.05);
  auto a = decompose(u, Pb, s.gs, s.rho);
  Pb.theta += 0.9;
  auto b = decompose(u * std::polar(1.0, 0.9), Pb, s.gs, s.rho);
  CHECK(std::abs(wrap(b.P.theta - a.P.theta - 0.9)) < 1e-9);
  for (std::size_t i = 0; i < a.ortho_residuals.size(); ++i)
    CHECK(std::abs(a.ortho_residuals[i] - b.ortho_residuals[i]) < 1e-12);
}

TEST_CASE("decompose with a small remainder") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  const ModParams exact = ModParams::pseudo_conformal(1.0, 0.2);
  Field bump = Field::sample(g, [](double x) { return std::exp(-(x - 0.5) * (x - 0.5)) * cplx(1.0, 0.5); });
  bump *= cplx(1e-3 / std::sqrt(h1_norm_squared(bump)));
  Field u = pseudo_conformal_ST(s.gs, 1.0, 0.2, g) + bump;
  auto res = decompose(u, exact, s.gs, s.rho);
  for (double r : res.ortho_residuals) CHECK(std::abs(r) < 1e-10 * s.gs.mass);
  const double eps = std::sqrt(h1_norm_squared(res.epsilon));
  CHECK(eps > 1e-4);
  CHECK(eps < 1e-2);
  CHECK(std::abs(res.P.lambda - exact.lambda) < 1e-2);
}

TEST_CASE("decompose reports inputs outside the basin") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  Field u(g);
  CHECK_THROWS_AS(decompose(u, ModParams{}, s.gs, s.rho), ConvergenceError);
  ModParams bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(decompose(s.gs.Q, bad, s.gs, s.rho), Error);
}

TEST_CASE("mod_vector on the exact flow converges at second order") {
  auto run = [](int n) {
    std::vector<double> t;
    std::vector<ModParams> P;
    for (int i = 0; i <= n; ++i) {
      t.push_back(0.5 * i / n);
      P.push_back(ModParams::pseudo_conformal(1.0, t.back()));
      P.back().theta = wrap(P.back().theta);
    }
    double m = 0.0;
    for (const auto& s : mod_vector(t, P, 1)) m = std::max(m, s.mod);
    return m;
  };
  const double e1 = run(20), e2 = run(40);
  CHECK(e1 < 1e-2);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));

  std::vector<double> t{0.0, 0.1, 0.2};
  std::vector<ModParams> P(3);
  auto mv = mod_vector(t, P, 1);
  for (const auto& s : mv) {
    CHECK(s.mod == doctest::Approx(1.0));
    double sum = 0.0;
    for (double c : s.components) sum += c;
    CHECK(s.mod == sum);
  }
  CHECK_THROWS_AS(mod_vector({0.0, 1.0}, {ModParams{}, ModParams{}}, 1), Error);
}

TEST_CASE("profile residual eta") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  ModParams P;
  P.theta = 0.3;
  auto r = profile_residual_eta(P, ModParams{0.0, {0, 0}, {0, 0}, 0.0, 0.0}, s.gs, g);
  CHECK(norm_l2(r.eta - s.gs.Q * std::polar(1.0, 0.3)) < 1e-9);

  const double T = 1.0, t = 0.4;
  ModParams Pt = ModParams::pseudo_conformal(T, t);
  ModParams Pdot;
  Pdot.lambda = -1.0;
  Pdot.gamma = -1.0;
  Pdot.theta = 1.0 / ((T - t) * (T - t));
  auto e = profile_residual_eta(Pt, Pdot, s.gs, g);
  CHECK(e.norm < 1e-8 * norm_l2(s.gs.Q));
}

TEST_CASE("generalized energy reductions") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  ModParams P = ModParams::pseudo_conformal(1.0, 0.3);
  Field w = deformed_profile(s.gs, P, g).field;
  Field zero(g);
  CHECK(generalized_energy(zero, w, P, 10.0) == 0.0);

  Field R = Field::sample(g, [](double x) { return 0.3 * std::exp(-x * x) * cplx(1.0, -0.4); });
  ModParams Q0 = P;
  Q0.gamma = 0.0;
  const double I = generalized_energy(R, zero, Q0, 10.0);
  const double g2 = gradient_norm(R);
  const double expect = 0.5 * g2 * g2 + mass(R) / (2.0 * P.lambda * P.lambda) - potential_integral(R) / 6.0;
  CHECK(I == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("modulation tracking along the exact solution") {
  const auto& s = wide_1d();
  auto g = s.gs.Q.grid_ptr();
  std::vector<std::pair<double, Field>> snaps;
  for (int i = 0; i <= 4; ++i) {
    const double t = 0.1 * i;
    snaps.emplace_back(t, pseudo_conformal_ST(s.gs, 1.0, t, g));
  }
  auto rows = track_modulation(snaps, ModParams::pseudo_conformal(1.0, 0.0), s.gs, s.rho);
  REQUIRE(rows.size() == 5);
  for (const auto& r : rows) {
    CHECK(r.eps_l2 < 1e-8);
    CHECK(std::abs(r.I) < 1e-12);
    CHECK(r.mod < 0.1);
  }
}
