#include "rnls/roughpath.hpp"

#include <cmath>

#include "rnls/spectral.hpp"

namespace rnls {

namespace detail {

void check_compatible(const std::vector<double>& mesh, int N, const BrownianLift& lift, int s, int t) {
  if (mesh != lift.mesh) throw Error("controlled path and lift live on different meshes");
  if (N != lift.N) throw Error("controlled path and lift have different numbers of paths");
  if (s < 0 || t > lift.cells() || s > t) throw Error("integration indices outside the mesh");
}

}  // namespace detail

double remainder_holder(const ControlledPath& Y, const BrownianLift& lift) {
  detail::check_compatible(Y.mesh, Y.N, lift, 0, lift.cells());
  double best = 0.0;
  const int P = Y.points();
  for (int s = 0; s < P; ++s)
    for (int t = s + 1; t < P; ++t) {
      const double h = std::pow(Y.mesh[t] - Y.mesh[s], 2.0 * Y.holder_alpha);
      for (int k = 0; k < Y.N; ++k) {
        double r = Y.y(k, t) - Y.y(k, s);
        for (int j = 0; j < Y.N; ++j) r -= Y.yprime(k, j, s) * (lift.at(j, t) - lift.at(j, s));
        best = std::max(best, std::abs(r) / h);
      }
    }
  return best;
}

double fit_rate(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw Error("rate fit needs at least two matching samples");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0) || !(err[i] > 0.0)) throw Error("rate fit needs positive samples");
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

nlohmann::ordered_json RoughResidualReport::to_json() const {
  auto c = [](cplx z) { return nlohmann::ordered_json::array({z.real(), z.imag()}); };
  nlohmann::ordered_json j;
  j["lhs"] = c(lhs);
  j["rhs"] = c(rhs);
  j["residual"] = residual;
  j["mesh"] = mesh_cells;
  if (std::isfinite(rate_estimate))
    j["rate_estimate"] = rate_estimate;
  else
    j["rate_estimate"] = nullptr;
  return j;
}

WeakFormSeries::WeakFormSeries(const std::vector<Field>& X_series, const std::vector<double>& mesh,
                               const NoiseBasis& basis, const Field& testfn)
    : mesh_(mesh), N_(basis.size()), path_(mesh, basis.size()) {
  if (X_series.size() != mesh.size()) throw Error("need one solution sample per mesh point");
  const Grid& g = testfn.grid();
  double edge = 0.0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    auto x = g.point(idx);
    if (std::max(std::abs(x[0]), std::abs(x[1])) >= 0.9 * g.half_length())
      edge = std::max(edge, std::abs(testfn[idx]));
  }
  if (edge >= 1e-12) throw Error("test function is not compactly supported inside the box");

  const double p = 4.0 / g.dim();
  const Field lap_phi = laplacian(testfn);
  const cplx I(0.0, 1.0);
  pair_.resize(mesh.size());
  drift_.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const Field& X = X_series[i];
    require_same_grid(X, testfn);
    Field nl(X.grid_ptr());
    for (std::size_t q = 0; q < X.size(); ++q) nl[q] = I * std::pow(std::abs(X[q]), p) * X[q] - basis.mu()[q] * X[q];
    pair_[i] = inner(X, testfn);
    drift_[i] = inner(X * I, lap_phi) + inner(nl, testfn);
    for (int k = 0; k < N_; ++k) {
      const Field phikX = X * basis.phi(k);
      path_.y(k, int(i)) = I * inner(phikX, testfn);
      for (int j = 0; j < N_; ++j) path_.yprime(k, j, int(i)) = -inner(phikX * basis.phi(j), testfn);
    }
  }
}

RoughResidualReport WeakFormSeries::evaluate(const BrownianLift& coarse_lift, int factor, int s_index,
                                             int t_index) const {
  ControlledPathT<cplx> coarse = subsample(path_, factor);
  auto stoch = rough_integrate(coarse, coarse_lift, s_index, t_index);
  RoughResidualReport r;
  r.mesh_cells = coarse_lift.cells();
  const int a = s_index * factor, b = t_index * factor;
  r.increment = pair_[b] - pair_[a];
  for (int I = s_index; I < t_index; ++I) {
    const double h = coarse.mesh[I + 1] - coarse.mesh[I];
    r.drift += 0.5 * h * (drift_[I * factor] + drift_[(I + 1) * factor]);
  }
  r.lhs = r.increment - r.drift;
  for (const auto& v : stoch) r.rhs += v;
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

RoughResidualReport verify_rough_solution(const std::vector<Field>& X_series, const BrownianLift& lift,
                                          const NoiseBasis& basis, const Field& testfn, int s_index, int t_index) {
  if (lift.N != basis.size()) throw Error("lift and basis have different numbers of modes");
  WeakFormSeries series(X_series, lift.mesh, basis, testfn);
  return series.evaluate(lift, 1, s_index, t_index);
}

RefinementStudy rough_refinement(const WeakFormSeries& series, const BrownianLift& fine_lift,
                                 const std::vector<int>& factors) {
  if (fine_lift.mesh != series.mesh()) throw Error("lift and solution series live on different meshes");
  RefinementStudy st;
  for (int f : factors) {
    BrownianLift coarse = fine_lift.coarsen(f);
    auto r = series.evaluate(coarse, f, 0, coarse.cells());
    st.cells.push_back(coarse.cells());
    st.mesh_sizes.push_back(coarse.mesh[1] - coarse.mesh[0]);
    st.residuals.push_back(r.residual);
  }
  if (st.residuals.size() >= 2) {
    bool positive = true;
    for (double e : st.residuals) positive = positive && e > 0.0;
    if (positive) st.rate = fit_rate(st.mesh_sizes, st.residuals);
  }
  return st;
}

}  // namespace rnls
