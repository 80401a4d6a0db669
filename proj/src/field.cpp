#include "rnls/field.hpp"

#include <algorithm>
#include <cmath>

#include "rnls/error.hpp"

namespace rnls {

Field::Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size()) {}

Field::Field(GridPtr grid, std::vector<cplx> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size()) throw Error("field size does not match grid");
}

cplx Field::at_origin() const {
  const int o = grid_->origin_index();
  return values_[grid_->flat(o, o)];
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

bool Field::same_grid(const Field& other) const {
  return grid_ == other.grid_ || (grid_ && other.grid_ && *grid_ == *other.grid_);
}

void require_same_grid(const Field& a, const Field& b) {
  if (!a.same_grid(b)) throw Error("incompatible grids");
}

Field& Field::operator+=(const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Field& Field::operator*=(cplx s) {
  for (auto& v : values_) v *= s;
  return *this;
}

Field& Field::operator*=(const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= other.values_[i];
  return *this;
}

Field Field::conj() const {
  Field out(*this);
  for (auto& v : out.values_) v = std::conj(v);
  return out;
}

Field Field::real_part() const {
  Field out(*this);
  for (auto& v : out.values_) v = v.real();
  return out;
}

Field Field::imag_part() const {
  Field out(*this);
  for (auto& v : out.values_) v = v.imag();
  return out;
}

std::vector<double> Field::abs() const {
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = std::abs(values_[i]);
  return out;
}

double Field::max_abs() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(Field a, const Field& b) { return a *= b; }
Field operator*(Field a, cplx s) { return a *= s; }
Field operator*(cplx s, Field a) { return a *= s; }

}  // namespace rnls
