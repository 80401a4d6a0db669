#include <doctest.h>

#include <cmath>

#include "rnls/error.hpp"
#include "rnls/roughpath.hpp"
#include "rnls/spectral.hpp"

using namespace rnls;

namespace {

ControlledPath brownian_itself(const BrownianLift& L) {
  ControlledPath Y(L.mesh, L.N);
  for (int i = 0; i <= L.cells(); ++i)
    for (int k = 0; k < L.N; ++k) {
      Y.y(k, i) = L.at(k, i);
      Y.yprime(k, k, i) = 1.0;
    }
  return Y;
}

// Y_0 = sin(B_1), Y_1 = cos(B_0), with their exact Gubinelli derivatives.
ControlledPath cross_functional(const BrownianLift& L) {
  ControlledPath Y(L.mesh, 2);
  for (int i = 0; i <= L.cells(); ++i) {
    Y.y(0, i) = std::sin(L.at(1, i));
    Y.y(1, i) = std::cos(L.at(0, i));
    Y.yprime(0, 1, i) = std::cos(L.at(1, i));
    Y.yprime(1, 0, i) = -std::sin(L.at(0, i));
  }
  return Y;
}

}  // namespace

TEST_CASE("integral of B against itself") {
  auto L = sample_brownian(2, uniform_mesh(1.0, 1024), 8, 17);
  auto I = rough_integrate(brownian_itself(L), L, 0, L.cells());
  for (int k = 0; k < 2; ++k) {
    const double B1 = L.at(k, L.cells());
    CHECK(std::abs(I[k] - 0.5 * (B1 * B1 - 1.0)) < 1e-12);
  }
}

TEST_CASE("constant integrand telescopes") {
  auto L = sample_brownian(3, uniform_mesh(2.0, 64), 4, 5);
  ControlledPath Y(L.mesh, 3);
  const double c[3] = {1.5, -0.25, 3.0};
  for (int i = 0; i <= L.cells(); ++i)
    for (int k = 0; k < 3; ++k) Y.y(k, i) = c[k];
  auto I = rough_integrate(Y, L, 0, 64);
  for (int k = 0; k < 3; ++k) CHECK(I[k] == doctest::Approx(c[k] * L.at(k, 64)).epsilon(1e-14));
}

TEST_CASE("additivity, linearity and the Ito sum") {
  auto L = sample_brownian(2, uniform_mesh(1.0, 128), 8, 23);
  auto Y1 = cross_functional(L);
  auto Y2 = brownian_itself(L);
  auto whole = rough_integrate(Y1, L, 0, 128);
  auto left = rough_integrate(Y1, L, 0, 50);
  auto right = rough_integrate(Y1, L, 50, 128);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(whole[k] - (left[k] + right[k])) < 1e-15);

  ControlledPath Y3(L.mesh, 2);
  const double a = 0.7, b = -1.9;
  for (std::size_t q = 0; q < Y3.Y.size(); ++q) Y3.Y[q] = a * Y1.Y[q] + b * Y2.Y[q];
  for (std::size_t q = 0; q < Y3.Yprime.size(); ++q) Y3.Yprime[q] = a * Y1.Yprime[q] + b * Y2.Yprime[q];
  auto I1 = rough_integrate(Y1, L, 0, 128), I2 = rough_integrate(Y2, L, 0, 128), I3 = rough_integrate(Y3, L, 0, 128);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(I3[k] - (a * I1[k] + b * I2[k])) < 1e-13);

  ControlledPath pc(L.mesh, 2);
  for (int i = 0; i <= 128; ++i) pc.y(0, i) = pc.y(1, i) = double(i / 16);
  auto r = rough_integrate(pc, L, 0, 128), ito = ito_left_sum(pc, L, 0, 128);
  CHECK(r == ito);

  CHECK_THROWS_AS(rough_integrate(Y1, L.coarsen(2), 0, 64), Error);
  CHECK_THROWS_AS(rough_integrate(Y1, L, 0, 129), Error);
}

TEST_CASE("complex integrands are integrated component-wise") {
  auto L = sample_brownian(2, uniform_mesh(1.0, 64), 8, 31);
  auto Yr = cross_functional(L);
  auto Yi = brownian_itself(L);
  ControlledPathT<cplx> Z(L.mesh, 2);
  for (std::size_t q = 0; q < Z.Y.size(); ++q) Z.Y[q] = cplx(Yr.Y[q], Yi.Y[q]);
  for (std::size_t q = 0; q < Z.Yprime.size(); ++q) Z.Yprime[q] = cplx(Yr.Yprime[q], Yi.Yprime[q]);
  auto Iz = rough_integrate(Z, L, 0, 64);
  auto Ir = rough_integrate(Yr, L, 0, 64), Ii = rough_integrate(Yi, L, 0, 64);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(Iz[k] - cplx(Ir[k], Ii[k])) < 1e-15);
}

TEST_CASE("remainder of a correctly controlled path is 2 alpha Hoelder") {
  auto L = sample_brownian(2, uniform_mesh(1.0, 256), 8, 3);
  auto Y = cross_functional(L);
  const double good = remainder_holder(Y, L);
  CHECK(std::isfinite(good));
  // Dropping the Gubinelli derivative leaves an alpha- (not 2 alpha-) Hoelder remainder.
  ControlledPath bad = Y;
  std::fill(bad.Yprime.begin(), bad.Yprime.end(), 0.0);
  const double worse = remainder_holder(bad, L);
  MESSAGE("remainder quotients: controlled " << good << ", uncontrolled " << worse);
  CHECK(worse > 2.0 * good);
}

TEST_CASE("rough minus Ito sums vanish at rate one half") {
  const int fine = 4096;
  const std::vector<int> factors = {64, 32, 16, 8, 4, 2, 1};
  std::vector<double> h, rms(factors.size(), 0.0);
  const int seeds = 40;
  for (int seed = 0; seed < seeds; ++seed) {
    auto L = sample_brownian(2, uniform_mesh(1.0, fine), 16, 500 + seed);
    auto Y = cross_functional(L);
    for (std::size_t f = 0; f < factors.size(); ++f) {
      auto C = L.coarsen(factors[f]);
      auto Yc = subsample(Y, factors[f]);
      auto r = rough_integrate(Yc, C, 0, C.cells());
      auto s = ito_left_sum(Yc, C, 0, C.cells());
      rms[f] += std::pow(r[0] - s[0], 2) + std::pow(r[1] - s[1], 2);
    }
  }
  for (std::size_t f = 0; f < factors.size(); ++f) {
    rms[f] = std::sqrt(rms[f] / seeds);
    h.push_back(1.0 / (fine / factors[f]));
  }
  const double rate = fit_rate(h, rms);
  MESSAGE("fitted rate " << rate);
  CHECK(rate > 0.4);
  CHECK(rate < 0.6);
}

TEST_CASE("weak-form residual of the zero solution") {
  auto g = make_grid(1, 256, 10.0);
  auto nb = NoiseBasis::flat_poly_gauss(g, {0.3}, {1.0});
  auto L = sample_brownian(1, uniform_mesh(0.5, 8), 4, 2);
  std::vector<Field> zeros(9, Field(g));
  Field phi = Field::sample(g, [](double x) { return std::exp(-x * x); });
  auto r = verify_rough_solution(zeros, L, nb, phi, 0, 8);
  CHECK(r.residual == 0.0);
  auto j = r.to_json();
  CHECK(j["mesh"] == 8);
  CHECK(j["rate_estimate"].is_null());

  Field wide = Field::sample(g, [](double x) { return std::exp(-x * x / 20); });
  CHECK_THROWS_WITH_AS(verify_rough_solution(zeros, L, nb, wide, 0, 8),
                       "test function is not compactly supported inside the box", Error);
}
