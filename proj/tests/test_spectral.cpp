#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles/radial_shooting.hpp"
#include "rnls/error.hpp"
#include "rnls/snapshot.hpp"
#include "rnls/spectral.hpp"

using namespace rnls;

namespace {

Field random_field(const GridPtr& g, std::uint64_t seed, bool real_only = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Field f(g);
  for (auto& v : f.values()) v = cplx(n01(rng), real_only ? 0.0 : n01(rng));
  return f;
}

// Smooth, localized random field: random Hermite-Gauss combination.
Field smooth_random_field(const GridPtr& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::array<cplx, 6> c;
  for (auto& z : c) z = cplx(n01(rng), n01(rng));
  return Field::sample(g, [&](double x, double y) {
    double r2 = x * x + y * y;
    cplx s = 0.0;
    double px = 1.0;
    for (auto z : c) {
      s += z * px;
      px *= (x + 0.5 * y);
    }
    return s * std::exp(-r2 / 2.0);
  });
}

}  // namespace

TEST_CASE("grid invariants") {
  auto g = make_grid(1, 64, 5.0);
  CHECK(g->dx() * g->n() == 2.0 * g->half_length());
  CHECK(g->coord(g->origin_index()) == 0.0);
  CHECK(g->wavenumbers()[1] == doctest::Approx(std::numbers::pi / 5.0));
  CHECK(g->wavenumbers()[32] == doctest::Approx(-32 * std::numbers::pi / 5.0));
  CHECK(g->k_odd(32) == 0.0);
  CHECK_THROWS_AS(make_grid(1, 24, 5.0), Error);
  CHECK_THROWS_AS(make_grid(1, 8, 5.0), Error);
  CHECK_THROWS_AS(make_grid(3, 16, 5.0), Error);
}

TEST_CASE("inner product") {
  auto g = make_grid(1, 2048, 20.0);
  Field Q = Field::sample(g, oracle::ground_state_1d);
  // int sqrt(3) sech(2x) dx = sqrt(3) pi / 2
  CHECK(inner(Q, Q).real() == doctest::Approx(std::sqrt(3.0) * std::numbers::pi / 2).epsilon(1e-12));
  CHECK(std::abs(inner(Q, Q).imag()) < 1e-15);

  Field zero(g);
  CHECK(inner(zero, zero) == cplx(0.0));

  Field v = random_field(g, 1), w = random_field(g, 2);
  cplx a = inner(v, w), b = inner(w, v);
  CHECK(std::abs(a - std::conj(b)) < 1e-12 * std::abs(a));
  // linear in the first slot, conjugate-linear in the second
  cplx s(0.3, -1.2);
  CHECK(std::abs(inner(v * s, w) - s * a) < 1e-12 * std::abs(a));
  CHECK(std::abs(inner(v, w * s) - std::conj(s) * a) < 1e-12 * std::abs(a));

  auto other = make_grid(1, 1024, 20.0);
  CHECK_THROWS_WITH_AS(inner(Field(other), v), "incompatible grids", Error);
}

TEST_CASE("spectral derivatives") {
  for (int d : {1, 2}) {
    auto g = make_grid(d, d == 1 ? 128 : 32, 4.0);
    const double k0 = g->wavenumbers()[5];
    Field e = Field::sample(g, [k0](double x, double) { return std::polar(1.0, k0 * x); });
    Field lap = laplacian(e);
    double err = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) err = std::max(err, std::abs(lap[i] + k0 * k0 * e[i]));
    CHECK(err < 1e-12 * k0 * k0);

    Field c = Field::sample(g, [](double, double) { return cplx(2.5, -1.0); });
    for (const auto& gc : gradient(c)) CHECK(gc.max_abs() < 1e-14);

    Field v = random_field(g, 11, true), w = random_field(g, 12, true);
    cplx lhs = inner(laplacian(v), w), rhs = inner(v, laplacian(w));
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs));
  }
}

TEST_CASE("gradient of real field is real (Nyquist dropped)") {
  auto g = make_grid(1, 64, 3.0);
  Field v = random_field(g, 5, true);
  for (const auto& gv : gradient(v)) {
    double im = 0.0;
    for (const auto& z : gv.values()) im = std::max(im, std::abs(z.imag()));
    CHECK(im < 1e-12);
  }
}

TEST_CASE("Parseval and inverse Laplacian") {
  for (int d : {1, 2}) {
    auto g = make_grid(d, d == 1 ? 512 : 64, 6.0);
    Field v = random_field(g, 21 + d);
    CHECK(norm_l2(v) == doctest::Approx(norm_l2_spectral(v)).epsilon(1e-12));

    Field hat = to_spectral(v);
    hat[0] = 0.0;
    Field mean_zero = from_spectral(hat);
    Field back = laplacian(inverse_laplacian(mean_zero));
    CHECK(norm_l2(back - mean_zero) < 1e-10 * norm_l2(mean_zero));
  }
}

TEST_CASE("conserved functionals of the 1-d ground state") {
  auto g = make_grid(1, 2048, 20.0);
  Field Q = Field::sample(g, oracle::ground_state_1d);
  CHECK(std::abs(energy(Q)) < 1e-8);
  auto p = momentum(Q);
  CHECK(std::abs(p[0]) < 1e-10);
  CHECK(p[1] == 0.0);
}

TEST_CASE("energy is phase invariant") {
  auto g = make_grid(2, 64, 6.0);
  Field u = smooth_random_field(g, 3);
  double e0 = energy(u);
  Field rotated = u * std::polar(1.0, 0.77);
  CHECK(std::abs(energy(rotated) - e0) < 1e-13 * std::abs(e0));
}

TEST_CASE("Gagliardo-Nirenberg threshold check") {
  auto g = make_grid(1, 2048, 20.0);
  Field Q = Field::sample(g, oracle::ground_state_1d);
  const double q_mass = mass(Q);

  Field gauss = Field::sample(g, [](double x) { return std::exp(-x * x / 2); });
  gauss *= 0.9 * std::sqrt(q_mass / mass(gauss));
  auto rg = gn_threshold_check(gauss, q_mass);
  CHECK(rg.satisfied);
  CHECK(rg.margin() > 0.0);

  auto rq = gn_threshold_check(Q, q_mass);
  CHECK(std::abs(rq.left) < 1e-10);
  CHECK(std::abs(rq.right) < 1e-8);
  CHECK(rq.satisfied);

  // Mass above the threshold: a concentrated Gaussian has negative energy.
  Field big = Field::sample(g, [](double x) { return std::exp(-8 * x * x); });
  big *= 1.5 * std::sqrt(q_mass / mass(big));
  CHECK(energy(big) < 0.0);

  CHECK_THROWS_AS(gn_threshold_check(Q, 0.0), Error);
}

TEST_CASE("snapshot file round trip") {
  auto g = make_grid(2, 16, 2.5);
  Field v = random_field(g, 9);
  auto path = std::filesystem::temp_directory_path() / "rnls_snapshot_test.rnls";
  write_snapshot(path, v);
  CHECK(std::filesystem::file_size(path) == 4 + 4 * 3 + 8 + 16 * 16 * 16);
  Field back = read_snapshot(path);
  CHECK(back.grid() == v.grid());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);

  std::ofstream(path, std::ios::binary) << "XXXXjunk";
  CHECK_THROWS_AS(read_snapshot(path), Error);
  std::filesystem::remove(path);
}
