#include "maxhdg/poly.hpp"

#include <algorithm>
#include <cmath>

#include "maxhdg/errors.hpp"

namespace maxhdg {

int dict_size(int deg) { return deg < 0 ? 0 : (deg + 1) * (deg + 2) / 2; }

int dict_index(int a, int b) {
  const int d = a + b;
  return d * (d + 1) / 2 + b;
}

std::pair<int, int> dict_powers(int index) {
  int d = 0;
  while ((d + 1) * (d + 2) / 2 <= index) ++d;
  const int b = index - d * (d + 1) / 2;
  return {d - b, b};
}

void Poly2::trim() {
  while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
}

Poly2 Poly2::zero() { return Poly2(); }

Poly2 Poly2::constant(double c) { return monomial(0, 0, c); }

Poly2 Poly2::monomial(int a, int b, double coeff) {
  if (a < 0 || b < 0) throw InternalError("negative monomial power");
  Poly2 p;
  p.c_.assign(dict_index(a, b) + 1, 0.0);
  p.c_[dict_index(a, b)] = coeff;
  p.trim();
  return p;
}

Poly2 Poly2::operator+(const Poly2& other) const {
  Poly2 out;
  out.c_.assign(std::max(c_.size(), other.c_.size()), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) out.c_[i] += c_[i];
  for (std::size_t i = 0; i < other.c_.size(); ++i) out.c_[i] += other.c_[i];
  out.trim();
  return out;
}

Poly2 Poly2::operator-(const Poly2& other) const { return *this + other * -1.0; }

Poly2 Poly2::operator*(const Poly2& other) const {
  Poly2 out;
  if (c_.empty() || other.c_.empty()) return out;
  const int deg = degree() + other.degree();
  out.c_.assign(dict_size(deg), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0.0) continue;
    const auto [ai, bi] = dict_powers(static_cast<int>(i));
    for (std::size_t j = 0; j < other.c_.size(); ++j) {
      if (other.c_[j] == 0.0) continue;
      const auto [aj, bj] = dict_powers(static_cast<int>(j));
      out.c_[dict_index(ai + aj, bi + bj)] += c_[i] * other.c_[j];
    }
  }
  out.trim();
  return out;
}

Poly2 Poly2::operator*(double s) const {
  Poly2 out = *this;
  for (double& v : out.c_) v *= s;
  out.trim();
  return out;
}

Poly2 Poly2::dx() const {
  Poly2 out;
  if (c_.empty()) return out;
  out.c_.assign(c_.size(), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0.0) continue;
    const auto [a, b] = dict_powers(static_cast<int>(i));
    if (a > 0) out.c_[dict_index(a - 1, b)] += a * c_[i];
  }
  out.trim();
  return out;
}

Poly2 Poly2::dy() const {
  Poly2 out;
  if (c_.empty()) return out;
  out.c_.assign(c_.size(), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0.0) continue;
    const auto [a, b] = dict_powers(static_cast<int>(i));
    if (b > 0) out.c_[dict_index(a, b - 1)] += b * c_[i];
  }
  out.trim();
  return out;
}

double Poly2::eval(double X, double Y) const {
  double total = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) {
    if (c_[i] == 0.0) continue;
    const auto [a, b] = dict_powers(static_cast<int>(i));
    total += c_[i] * std::pow(X, a) * std::pow(Y, b);
  }
  return total;
}

double Poly2::coeff(int a, int b) const {
  const std::size_t idx = static_cast<std::size_t>(dict_index(a, b));
  return idx < c_.size() ? c_[idx] : 0.0;
}

int Poly2::degree() const {
  if (c_.empty()) return -1;
  return dict_powers(static_cast<int>(c_.size()) - 1).first +
         dict_powers(static_cast<int>(c_.size()) - 1).second;
}

std::vector<double> Poly2::dense_coeffs(int deg) const {
  std::vector<double> out(dict_size(deg), 0.0);
  const std::size_t count = std::min(out.size(), c_.size());
  for (std::size_t i = 0; i < count; ++i) out[i] = c_[i];
  if (c_.size() > out.size()) {
    for (std::size_t i = out.size(); i < c_.size(); ++i) {
      if (c_[i] != 0.0) throw InternalError("polynomial degree exceeds dictionary");
    }
  }
  return out;
}

}  // namespace maxhdg
