// Dense bivariate polynomial arithmetic over the graded-lexicographic monomial
// dictionary X^a Y^b (total degree ascending, Y-power ascending within a
// degree). Used to construct polynomial-space bases symbolically before they
// are orthonormalized numerically.
#pragma once

#include <utility>
#include <vector>

namespace maxhdg {

// Number of monomials of total degree <= deg.
int dict_size(int deg);

// Dictionary position of X^a Y^b.
int dict_index(int a, int b);

// Inverse of dict_index.
std::pair<int, int> dict_powers(int index);

class Poly2 {
 public:
  Poly2() = default;

  static Poly2 zero();
  static Poly2 constant(double c);
  static Poly2 monomial(int a, int b, double coeff = 1.0);

  Poly2 operator+(const Poly2& other) const;
  Poly2 operator-(const Poly2& other) const;
  Poly2 operator*(const Poly2& other) const;
  Poly2 operator*(double s) const;

  Poly2 dx() const;  // d/dX
  Poly2 dy() const;  // d/dY

  double eval(double X, double Y) const;
  double coeff(int a, int b) const;

  // Actual total degree (-1 for the zero polynomial).
  int degree() const;

  // Coefficients padded with zeros to the dictionary of degree deg. Throws
  // InternalError if a nonzero coefficient of higher degree would be dropped.
  std::vector<double> dense_coeffs(int deg) const;

 private:
  std::vector<double> c_;  // graded-lex dense coefficients
  void trim();
};

inline Poly2 operator*(double s, const Poly2& p) { return p * s; }

}  // namespace maxhdg
