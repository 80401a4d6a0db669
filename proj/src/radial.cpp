#include "rnls/radial.hpp"

#include <cmath>

#include "rnls/error.hpp"
#include "rnls/fft.hpp"

namespace rnls {

RadialProfile RadialProfile::from_field(const Field& f, int refine) {
  const Grid& g = f.grid();
  const int n = g.n();
  const int big = n * refine;
  const int o = g.origin_index();
  std::vector<cplx> slice(n);
  for (int i = 0; i < n; ++i) slice[i] = f[g.dim() == 1 ? g.flat(i) : g.flat(i, o)].real();

  std::vector<cplx> hat(n);
  fft::forward_1d(n, slice, hat);

  std::vector<cplx> pad(big, 0.0), dpad(big, 0.0);
  const double dk = std::acos(-1.0) / g.half_length();
  auto place = [&](int pos, int m, cplx c) {
    pad[pos] += c;
    dpad[pos] += cplx(0.0, dk * m) * c;
  };
  for (int m = 0; m < n / 2; ++m) place(m, m, hat[m]);
  for (int m = n / 2 + 1; m < n; ++m) place(big - (n - m), m - n, hat[m]);
  place(n / 2, n / 2, 0.5 * hat[n / 2]);
  place(big - n / 2, -n / 2, 0.5 * hat[n / 2]);

  std::vector<cplx> fine(big), dfine(big);
  fft::inverse_1d(big, pad, fine);
  fft::inverse_1d(big, dpad, dfine);

  RadialProfile p;
  p.h_ = g.dx() / refine;
  // The table runs through r = L, which is the periodic image of x = -L.
  p.val_.resize(big / 2 + 1);
  p.der_.resize(big / 2 + 1);
  for (int j = 0; j <= big / 2; ++j) {
    p.val_[j] = fine[(big / 2 + j) % big].real() * refine;
    p.der_[j] = dfine[(big / 2 + j) % big].real() * refine;
  }
  return p;
}

double RadialProfile::interpolate(const std::vector<double>& table, double r, bool odd) const {
  if (table.empty()) throw Error("radial profile is empty");
  r = std::abs(r);
  const int last = int(table.size()) - 1;
  if (r > h_ * last) return 0.0;
  const double s = r / h_;
  int j0 = int(std::floor(s)) - 3;
  if (j0 + 7 > last) j0 = last - 7;
  // Mirror indices below zero: q is even in r, q' odd.
  auto at = [&](int j) {
    if (j >= 0) return table[j];
    return odd ? -table[-j] : table[-j];
  };
  double result = 0.0;
  for (int a = 0; a < 8; ++a) {
    const int ja = j0 + a;
    if (s == double(ja)) return at(ja);
    double w = 1.0;
    for (int b = 0; b < 8; ++b) {
      if (b == a) continue;
      w *= (s - double(j0 + b)) / double(a - b);
    }
    result += w * at(ja);
  }
  return result;
}

double RadialProfile::value(double r) const { return interpolate(val_, r, false); }

double RadialProfile::derivative(double r) const {
  double d = interpolate(der_, r, true);
  return r < 0.0 ? -d : d;
}

double RadialProfile::support_radius(double rel_tol) const {
  const double ref = std::abs(val_.at(0));
  for (int j = int(val_.size()) - 1; j >= 0; --j) {
    if (std::abs(val_[j]) > rel_tol * ref) return h_ * (j + 1);
  }
  return 0.0;
}

double RadialProfile::tail_fraction(double R, int dim) const {
  double total = 0.0, tail = 0.0;
  for (std::size_t j = 0; j < val_.size(); ++j) {
    const double r = h_ * double(j);
    const double w = val_[j] * val_[j] * (dim == 2 ? r : 1.0);
    total += w;
    if (r > R) tail += w;
  }
  return total > 0.0 ? tail / total : 0.0;
}

}  // namespace rnls
