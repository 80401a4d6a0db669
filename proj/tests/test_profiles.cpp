#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "oracles/radial_shooting.hpp"
#include "rnls/error.hpp"
#include "rnls/profiles.hpp"
#include "rnls/spectral.hpp"

using namespace rnls;

namespace {

const GroundState& ground_1d() {
  static const GroundState gs = solve_ground_state(make_grid(1, 2048, 20.0));
  return gs;
}

// Wide box: Q(L) ~ 1e-17, so band-limited transforms see no truncated tail.
const GroundState& ground_1d_wide() {
  static const GroundState gs = solve_ground_state(make_grid(1, 4096, 40.0));
  return gs;
}

const GroundState& ground_2d() {
  static const GroundState gs = solve_ground_state(make_grid(2, 512, 16.0));
  return gs;
}

double sup_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("1-d ground state against the closed form") {
  const auto& gs = ground_1d();
  CHECK(gs.residual < 1e-10);
  CHECK(ground_state_residual(gs.Q) < 1e-10);
  CHECK(gs.Q.at_origin().real() == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-10));
  CHECK(gs.mass == doctest::Approx(std::sqrt(3.0) * std::numbers::pi / 2).epsilon(1e-10));
  Field exact = Field::sample(gs.Q.grid_ptr(), oracle::ground_state_1d);
  CHECK(sup_diff(gs.Q, exact) < 1e-8);

  const auto& g = gs.Q.grid();
  double max_val = 0.0;
  bool positive = true;
  double asym = 0.0;
  for (int i = 0; i < g.n(); ++i) {
    positive = positive && gs.Q[i].real() > 0.0;
    max_val = std::max(max_val, gs.Q[i].real());
    asym = std::max(asym, std::abs(gs.Q[i] - gs.Q[g.mirror(i)]));
  }
  CHECK(positive);
  CHECK(asym < 1e-12);
  CHECK(max_val == gs.Q.at_origin().real());
}

TEST_CASE("Petviashvili residual is monotone after burn-in") {
  const auto& h = ground_1d().residual_history;
  REQUIRE(h.size() > 6);
  for (std::size_t i = 6; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
}

TEST_CASE("2-d ground state against the shooting oracle") {
  const auto& gs = ground_2d();
  CHECK(gs.residual < 1e-10);
  CHECK(gs.mass == doctest::Approx(oracle::shoot_ground_state_2d().mass).epsilon(1e-6));
  CHECK(gs.Q.at_origin().real() == doctest::Approx(oracle::shoot_ground_state_2d().q0).epsilon(1e-6));
}

TEST_CASE("ground state preconditions") {
  CHECK_THROWS_AS(solve_ground_state(make_grid(1, 64, 20.0)), Error);
  CHECK_THROWS_AS(solve_ground_state(make_grid(1, 2048, 20.0), 1e-3), Error);
  CHECK_THROWS_AS(solve_ground_state(make_grid(1, 2048, 20.0), 1e-12, 3), ConvergenceError);
}

TEST_CASE("rho profile") {
  // rho ~ |x|^3 e^{-|x|} in d = 1, so its box is wider than the one Q needs.
  static const GroundState gs2 = solve_ground_state(make_grid(2, 1024, 32.0));
  for (const GroundState* gs : {&ground_1d_wide(), &gs2}) {
    RhoProfile rp = solve_rho(*gs);
    CHECK(rp.residual < 1e-8);
    const auto& g = rp.rho.grid();
    double asym = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      auto ax = g.axis_indices(idx);
      std::size_t m = g.dim() == 1 ? g.mirror(ax[0]) : g.flat(g.mirror(ax[0]), g.mirror(ax[1]));
      asym = std::max(asym, std::abs(rp.rho[idx] - rp.rho[m]));
    }
    CHECK(asym < 1e-10);
    for (const auto& dq : gradient(gs->Q)) CHECK(std::abs(inner(rp.rho, dq)) < 1e-10);

    // Decay: the measured rate exceeds 1/2, and |rho| is tiny at the edge.
    const double L = g.half_length();
    double rate = measure_decay_rate(rp.rho, 0.25 * L, 0.75 * L);
    MESSAGE("d=" << g.dim() << " rho decay rate " << rate);
    CHECK(rate > 0.5);
    double edge = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
      auto x = g.point(idx);
      if (std::hypot(x[0], x[1]) > 0.9 * L) edge = std::max(edge, std::abs(rp.rho[idx]));
    }
    CHECK(edge < 1e-8);
  }
}

TEST_CASE("deformed profile") {
  const auto& gs = ground_1d();
  auto grid = gs.Q.grid_ptr();
  auto id = deformed_profile(gs, ModParams{}, grid);
  CHECK(sup_diff(id.field, gs.Q) < 1e-12);
  CHECK_FALSE(id.support_warning);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ModParams P;
    P.lambda = 0.5 + 0.4 * (U(rng) + 1.0);
    P.alpha[0] = 2.0 * U(rng);
    P.beta[0] = U(rng);
    P.gamma = U(rng);
    P.theta = 3.0 * U(rng);
    CHECK(mass(deformed_profile(gs, P, grid).field) == doctest::Approx(gs.mass).epsilon(1e-10));
  }

  const double T = 1.0, t = 0.3;
  auto w = deformed_profile(gs, ModParams{T - t, {0, 0}, {0, 0}, T - t, 1 / (T - t)}, grid);
  CHECK(sup_diff(w.field, pseudo_conformal_ST(gs, T, t, grid)) < 1e-12);

  ModParams wide{4.0, {0, 0}, {0, 0}, 0.0, 0.0};
  CHECK(deformed_profile(gs, wide, grid).support_warning);
  CHECK_THROWS_AS(deformed_profile(gs, ModParams{0.0}, grid), Error);
}

TEST_CASE("deformed profile acts as a group on phase and translation") {
  const auto& gs = ground_1d_wide();
  auto grid = gs.Q.grid_ptr();
  ModParams a{0.8, {0.7, 0}, {0.3, 0}, 0.2, 0.4};
  ModParams b = a;
  b.alpha[0] += 1.1;
  b.theta += 0.9;
  Field left = deformed_profile(gs, b, grid).field;
  // Shifting alpha by 1.1 and theta by 0.9 equals translating the field and rotating its phase.
  Field base = deformed_profile(gs, a, grid).field;
  Field right = apply_symmetry(base, 1.0, {0, 0}, 0.9, {1.1, 0}).field;
  CHECK(sup_diff(left, right) < 1e-10);
}

TEST_CASE("pseudo-conformal solution") {
  const auto& gs = ground_1d();
  auto grid = make_grid(1, 16384, 32.0);
  CHECK(mass(pseudo_conformal_ST(gs, 1.0, 0.0, grid)) == doctest::Approx(gs.mass).epsilon(1e-10));

  Field yQ = gs.Q;
  for (std::size_t i = 0; i < yQ.size(); ++i) yQ[i] = gs.Q.grid().coord(i) * gs.Q[i];
  const double e_expected = mass(yQ) / 8.0;

  // grad S_T = lambda^{-1/2} (Q'(y)/lambda - i (y/2) Q(y)) e^{i phase}, y = x/lambda, lambda = T - t,
  // so (T-t)^2 ||grad S_T||^2 = ||grad Q||^2 + (T-t)^2 ||yQ||^2 / 4.
  const double gq2 = std::pow(gradient_norm(gs.Q), 2);
  for (double t : {0.0, 0.5, 0.75, 0.9}) {
    Field S = pseudo_conformal_ST(gs, 1.0, t, grid);
    const double lam = 1.0 - t;
    const double c2 = std::pow(gradient_norm(S) * lam, 2);
    CHECK(c2 == doctest::Approx(gq2 + 0.25 * lam * lam * mass(yQ)).epsilon(1e-9));
    CHECK(energy(S) == doctest::Approx(e_expected).epsilon(1e-6));
    CHECK(mass(S) == doctest::Approx(gs.mass).epsilon(1e-8));
    CHECK(gn_threshold_check(S, gs.mass).satisfied);
  }
  CHECK_THROWS_WITH_AS(pseudo_conformal_ST(gs, 1.0, 1.0, grid), "evaluated at/after blow-up time", Error);
}

TEST_CASE("symmetries") {
  const auto& gs = ground_1d();
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int d : {1, 2}) {
    auto grid = make_grid(d, d == 1 ? 256 : 64, 10.0);
    std::array<cplx, 4> c;
    for (auto& z : c) z = cplx(n01(rng), n01(rng));
    Field u = Field::sample(grid, [&](double x, double y) {
      return (c[0] + c[1] * x + c[2] * y + c[3] * x * y) * std::exp(-(x * x + y * y));
    });
    auto same = apply_symmetry(u, 1.0, {0, 0}, 0.0, {0, 0});
    CHECK(sup_diff(same.field, u) < 1e-12);
    auto moved = apply_symmetry(u, 1.3, {0.4, -0.2}, 0.5, {0.6, -0.3});
    CHECK_FALSE(moved.support_warning);
    CHECK(mass(moved.field) == doctest::Approx(mass(u)).epsilon(1e-10));
  }
  (void)gs;

  // The pseudo-conformal map sends the soliton Q e^{is} at s = 1/(-t) to S_0(t).
  auto grid = gs.Q.grid_ptr();
  const double t = -0.8;
  Field snap = gs.Q * std::polar(1.0, 1.0 / -t);
  auto pc = pseudo_conformal_transform(snap, t);
  CHECK_FALSE(pc.support_warning);
  CHECK(sup_diff(pc.field, pseudo_conformal_ST(gs, 0.0, t, grid)) < 1e-9);
  CHECK(mass(pc.field) == doctest::Approx(gs.mass).epsilon(1e-10));
  CHECK_THROWS_AS(pseudo_conformal_transform(snap, 0.0), Error);
}

TEST_CASE("ModParams vector layout") {
  ModParams P{0.7, {1, 2}, {3, 4}, 5, 6};
  auto v = P.to_vector(2);
  CHECK(v == std::vector<double>{0.7, 1, 2, 3, 4, 5, 6});
  auto back = ModParams::from_vector(v, 2);
  CHECK(back.alpha[1] == 2);
  CHECK(back.beta[0] == 3);
  CHECK(P.to_vector(1).size() == 5);
  CHECK_THROWS_AS(ModParams::from_vector(v, 1), Error);
  auto S = ModParams::pseudo_conformal(1.0, 0.75);
  CHECK(S.lambda == 0.25);
  CHECK(S.gamma == 0.25);
  CHECK(S.theta == 4.0);
}

TEST_CASE("profile cache round trip") {
  auto dir = std::filesystem::temp_directory_path() / "rnls_cache_test";
  std::filesystem::remove_all(dir);
  auto grid = make_grid(1, 512, 20.0);
  auto first = cached_ground_state(grid, dir);
  CHECK(std::filesystem::exists(dir / "Q_d1_n512_L20.rnls"));
  CHECK(std::filesystem::exists(dir / "Q_d1_n512_L20.json"));
  auto second = cached_ground_state(grid, dir);
  CHECK(sup_diff(first.Q, second.Q) == 0.0);
  CHECK(second.residual == first.residual);
  auto rho1 = cached_rho(first, dir);
  auto rho2 = cached_rho(second, dir);
  CHECK(sup_diff(rho1.rho, rho2.rho) == 0.0);
  std::filesystem::remove_all(dir);
}
