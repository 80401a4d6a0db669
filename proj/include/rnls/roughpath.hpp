#pragma once

#include <complex>
#include <limits>
#include <vector>

#include <json.hpp>

#include "rnls/error.hpp"
#include "rnls/field.hpp"
#include "rnls/noise.hpp"

namespace rnls {

/// A path Y_k on a time mesh with Gubinelli derivative Y'_{kj} = dY_k / dB_j.
template <class T>
struct ControlledPathT {
  std::vector<double> mesh;
  int N = 0;
  std::vector<T> Y;       ///< Y[k * (M + 1) + i]
  std::vector<T> Yprime;  ///< Yprime[(i * N + k) * N + j] = Y'_{kj}(t_i)
  double holder_alpha = 0.4;

  ControlledPathT() = default;
  ControlledPathT(std::vector<double> m, int n)
      : mesh(std::move(m)), N(n), Y(std::size_t(n) * mesh.size()), Yprime(mesh.size() * n * n) {}

  int points() const { return int(mesh.size()); }
  T& y(int k, int i) { return Y[std::size_t(k) * mesh.size() + i]; }
  const T& y(int k, int i) const { return Y[std::size_t(k) * mesh.size() + i]; }
  T& yprime(int k, int j, int i) { return Yprime[(std::size_t(i) * N + k) * N + j]; }
  const T& yprime(int k, int j, int i) const { return Yprime[(std::size_t(i) * N + k) * N + j]; }
};

using ControlledPath = ControlledPathT<double>;

namespace detail {
void check_compatible(const std::vector<double>& mesh, int N, const BrownianLift& lift, int s, int t);
}

/// Compensated Riemann sum sum_i [Y_k(t_i) dB_k + sum_j Y'_{kj}(t_i) BB_{jk}] over cells s..t-1.
template <class T>
std::vector<T> rough_integrate(const ControlledPathT<T>& Y, const BrownianLift& lift, int s, int t) {
  detail::check_compatible(Y.mesh, Y.N, lift, s, t);
  std::vector<T> out(Y.N, T(0));
  for (int i = s; i < t; ++i)
    for (int k = 0; k < Y.N; ++k) {
      T v = Y.y(k, i) * lift.increment(k, i);
      for (int j = 0; j < Y.N; ++j) v += Y.yprime(k, j, i) * lift.iterated(j, k, i);
      out[k] += v;
    }
  return out;
}

/// Ito left-point sum sum_i Y_k(t_i) dB_k (the Gubinelli derivative is ignored).
template <class T>
std::vector<T> ito_left_sum(const ControlledPathT<T>& Y, const BrownianLift& lift, int s, int t) {
  detail::check_compatible(Y.mesh, Y.N, lift, s, t);
  std::vector<T> out(Y.N, T(0));
  for (int i = s; i < t; ++i)
    for (int k = 0; k < Y.N; ++k) out[k] += Y.y(k, i) * lift.increment(k, i);
  return out;
}

/// Restriction of Y to every `factor`-th mesh point.
template <class T>
ControlledPathT<T> subsample(const ControlledPathT<T>& Y, int factor) {
  if (factor < 1 || (Y.points() - 1) % factor != 0) throw Error("subsampling factor must divide the mesh");
  std::vector<double> m;
  for (int i = 0; i < Y.points(); i += factor) m.push_back(Y.mesh[i]);
  ControlledPathT<T> out(m, Y.N);
  out.holder_alpha = Y.holder_alpha;
  for (int I = 0; I < out.points(); ++I)
    for (int k = 0; k < Y.N; ++k) {
      out.y(k, I) = Y.y(k, I * factor);
      for (int j = 0; j < Y.N; ++j) out.yprime(k, j, I) = Y.yprime(k, j, I * factor);
    }
  return out;
}

/// Largest mesh quotient |R^Y_{k,st}| / |t - s|^{2 alpha} of the remainder
/// R^Y_{k,st} = dY_{k,st} - sum_j Y'_{kj}(s) dB_{j,st}.
double remainder_holder(const ControlledPath& Y, const BrownianLift& lift);

/// Slope of log(err) against log(h), by least squares.
double fit_rate(const std::vector<double>& h, const std::vector<double>& err);

/// Both sides of the weak rough-solution identity on [t_s, t_t]:
/// <X(t) - X(s), phi> - int <iX, Delta phi> + <i|X|^{4/d} X, phi> - <mu X, phi> dr
///   = sum_k int <i phi_k X, phi> dB_k.
struct RoughResidualReport {
  cplx lhs = 0.0;
  cplx rhs = 0.0;
  cplx increment = 0.0;  ///< <X(t) - X(s), phi>
  cplx drift = 0.0;      ///< trapezoid time integral
  double residual = 0.0;
  int mesh_cells = 0;
  double rate_estimate = std::numeric_limits<double>::quiet_NaN();

  nlohmann::ordered_json to_json() const;
};

/// Pairings of a sampled solution X(t_i) with a test function, computed once
/// on the finest mesh and reused for every coarsening.
class WeakFormSeries {
 public:
  WeakFormSeries(const std::vector<Field>& X_series, const std::vector<double>& mesh, const NoiseBasis& basis,
                 const Field& testfn);

  /// Residual on the mesh coarsened by `factor`, using the matching coarsened lift.
  RoughResidualReport evaluate(const BrownianLift& coarse_lift, int factor, int s_index, int t_index) const;

  const std::vector<double>& mesh() const { return mesh_; }
  int modes() const { return N_; }

 private:
  std::vector<double> mesh_;
  int N_ = 0;
  std::vector<cplx> pair_;   ///< <X_i, phi>
  std::vector<cplx> drift_;  ///< drift integrand at t_i
  ControlledPathT<cplx> path_;
};

/// Weak-form residual at the stored mesh resolution.
RoughResidualReport verify_rough_solution(const std::vector<Field>& X_series, const BrownianLift& lift,
                                          const NoiseBasis& basis, const Field& testfn, int s_index, int t_index);

struct RefinementStudy {
  std::vector<int> cells;
  std::vector<double> mesh_sizes;
  std::vector<double> residuals;
  double rate = std::numeric_limits<double>::quiet_NaN();
};

/// Residual over [t_0, t_M] at each coarsening factor, with a fitted rate.
RefinementStudy rough_refinement(const WeakFormSeries& series, const BrownianLift& fine_lift,
                                 const std::vector<int>& factors);

}  // namespace rnls
