// Gauss quadrature on edges, triangles, and (sheared) quadrilaterals with a
// guaranteed polynomial exactness degree, plus exact polygon monomial moments
// (via the divergence theorem) used to validate the 2D rules.
#pragma once

#include <vector>

#include "maxhdg/geometry.hpp"

namespace maxhdg {

// Highest exactness degree the rule factory accepts.
inline constexpr int kMaxQuadratureDegree = 30;

struct QuadRule1D {
  std::vector<double> x;  // nodes in [-1, 1], ascending
  std::vector<double> w;  // positive weights summing to 2
  int exactness = 0;
};

struct QuadPoint {
  Vec2 p;
  double w = 0.0;
};

struct QuadRule {
  std::vector<QuadPoint> points;
  int exactness = 0;
};

// Gauss-Legendre rule on [-1, 1] exact for polynomials of degree <= degree.
QuadRule1D gauss_legendre(int degree);

// Rule over a straight edge, exact for polynomials of degree <= degree in the
// arclength parameter; weights carry the arclength measure.
QuadRule edge_rule(const EdgeGeometry& edge, int degree);

// Rule over a triangle or parallelogram/square element, exact for bivariate
// polynomials of total degree <= degree.
QuadRule element_rule(const ElementGeometry& element, int degree);

// Exact integral of x^i y^j over a simple polygon (ccw), computed edge-wise
// with 1D Gauss rules through the divergence theorem. Independent code path
// from element_rule; used as its test oracle.
double polygon_moment(const std::vector<Vec2>& ccw_polygon, int i, int j);

}  // namespace maxhdg
