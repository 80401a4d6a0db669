#include "rnls/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rnls {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

KrylovResult minres(const LinearOp& apply_a, const LinearOp& apply_m_inv, const std::vector<double>& b,
                    double tol, int max_iter) {
  const std::size_t n = b.size();
  KrylovResult res;
  res.x.assign(n, 0.0);

  std::vector<double> r1 = b, r2 = b, y(n), v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
  apply_m_inv(r1, y);
  const double beta1 = std::sqrt(std::max(dot(r1, y), 0.0));
  if (beta1 == 0.0) {
    res.converged = true;
    return res;
  }

  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  const double tiny = std::numeric_limits<double>::epsilon();

  for (int itn = 1; itn <= max_iter; ++itn) {
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    apply_a(v, y);
    if (itn >= 2) {
      const double f = beta / oldb;
      for (std::size_t i = 0; i < n; ++i) y[i] -= f * r1[i];
    }
    const double alfa = dot(v, y);
    for (std::size_t i = 0; i < n; ++i) y[i] -= (alfa / beta) * r2[i];
    r1.swap(r2);
    r2 = y;
    apply_m_inv(r2, y);
    oldb = beta;
    beta = std::sqrt(std::max(dot(r2, y), 0.0));

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), tiny);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1.swap(w2);
    w2.swap(w);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
      res.x[i] += phi * w[i];
    }
    res.iterations = itn;
    res.relative_residual = phibar / beta1;
    res.history.push_back(res.relative_residual);
    if (res.relative_residual < tol) {
      res.converged = true;
      break;
    }
    if (beta == 0.0) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace rnls
