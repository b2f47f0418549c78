#include "maxhdg/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "maxhdg/errors.hpp"

namespace maxhdg {

namespace {

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree) {
    throw ConfigError("quadrature exactness degree outside supported range [0, 30]");
  }
}

// Golub-Welsch: nodes/weights from the symmetric tridiagonal Jacobi matrix of
// the Legendre recurrence. Deterministic and accurate to machine precision.
QuadRule1D compute_gauss_legendre(int npts) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(npts, npts);
  for (int k = 1; k < npts; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  QuadRule1D rule;
  rule.x.resize(npts);
  rule.w.resize(npts);
  for (int i = 0; i < npts; ++i) {
    rule.x[i] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    rule.w[i] = 2.0 * v0 * v0;
  }
  rule.exactness = 2 * npts - 1;
  return rule;
}

const QuadRule1D& cached_gauss_legendre(int npts) {
  static std::map<int, QuadRule1D> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(npts);
  if (it == cache.end()) it = cache.emplace(npts, compute_gauss_legendre(npts)).first;
  return it->second;
}

int points_for_degree(int degree) { return degree / 2 + 1; }

QuadRule triangle_rule(const ElementGeometry& element, int degree) {
  // Collapsed tensor rule: map the unit square (a, b) onto the triangle via
  // r = a (1 - b), s = b with Jacobian (1 - b). A degree-d monomial pulls back
  // to degree d in a and d + 1 in b (including the Jacobian), so exactness
  // follows from the two 1D rules below.
  const QuadRule1D& ga = cached_gauss_legendre(points_for_degree(degree));
  const QuadRule1D& gb = cached_gauss_legendre(points_for_degree(degree + 1));
  const Vec2 v0 = element.vertex[0];
  const Vec2 e1 = element.vertex[1] - v0;
  const Vec2 e2 = element.vertex[2] - v0;
  const double jac = cross(e1, e2);  // = 2 * area, positive for ccw
  QuadRule rule;
  rule.exactness = degree;
  rule.points.reserve(ga.x.size() * gb.x.size());
  for (std::size_t i = 0; i < ga.x.size(); ++i) {
    const double a = 0.5 * (ga.x[i] + 1.0);
    const double wa = 0.5 * ga.w[i];
    for (std::size_t j = 0; j < gb.x.size(); ++j) {
      const double b = 0.5 * (gb.x[j] + 1.0);
      const double wb = 0.5 * gb.w[j];
      const double r = a * (1.0 - b);
      const double s = b;
      QuadPoint qp;
      qp.p = v0 + r * e1 + s * e2;
      qp.w = wa * wb * (1.0 - b) * jac;
      rule.points.push_back(qp);
    }
  }
  return rule;
}

QuadRule quad_rule_affine(const ElementGeometry& element, int degree) {
  // Parallelograms (and axis-aligned squares) are affine images of the unit
  // square, so a tensor Gauss rule keeps its exactness; Jacobian is constant.
  const QuadRule1D& g = cached_gauss_legendre(points_for_degree(degree));
  const Vec2 v0 = element.vertex[0];
  const Vec2 e1 = element.vertex[1] - v0;
  const Vec2 e2 = element.vertex[3] - v0;
  const double jac = cross(e1, e2);
  QuadRule rule;
  rule.exactness = degree;
  rule.points.reserve(g.x.size() * g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double a = 0.5 * (g.x[i] + 1.0);
    const double wa = 0.5 * g.w[i];
    for (std::size_t j = 0; j < g.x.size(); ++j) {
      const double b = 0.5 * (g.x[j] + 1.0);
      const double wb = 0.5 * g.w[j];
      QuadPoint qp;
      qp.p = v0 + a * e1 + b * e2;
      qp.w = wa * wb * jac;
      rule.points.push_back(qp);
    }
  }
  return rule;
}

}  // namespace

QuadRule1D gauss_legendre(int degree) {
  check_degree(degree);
  return cached_gauss_legendre(points_for_degree(degree));
}

QuadRule edge_rule(const EdgeGeometry& edge, int degree) {
  check_degree(degree);
  const QuadRule1D& g = cached_gauss_legendre(points_for_degree(degree));
  const Vec2 mid = 0.5 * (edge.a + edge.b);
  const Vec2 half = 0.5 * (edge.b - edge.a);
  QuadRule rule;
  rule.exactness = degree;
  rule.points.reserve(g.x.size());
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    QuadPoint qp;
    qp.p = mid + g.x[i] * half;
    qp.w = 0.5 * edge.length * g.w[i];
    rule.points.push_back(qp);
  }
  return rule;
}

QuadRule element_rule(const ElementGeometry& element, int degree) {
  check_degree(degree);
  if (element.shape == CellShape::triangle) return triangle_rule(element, degree);
  return quad_rule_affine(element, degree);
}

double polygon_moment(const std::vector<Vec2>& ccw_polygon, int i, int j) {
  // Divergence theorem with F = (x^{i+1} y^j / (i+1), 0):
  //   integral of x^i y^j over the polygon = sum over edges of
  //   integral of x^{i+1} y^j / (i+1) * n_x ds.
  if (i < 0 || j < 0) throw ConfigError("polygon_moment requires nonnegative powers");
  const int edge_degree = i + 1 + j;
  const QuadRule1D& g = cached_gauss_legendre(points_for_degree(edge_degree));
  double total = 0.0;
  const std::size_t n = ccw_polygon.size();
  for (std::size_t e = 0; e < n; ++e) {
    const Vec2 a = ccw_polygon[e];
    const Vec2 b = ccw_polygon[(e + 1) % n];
    const Vec2 d = b - a;
    const double len = norm(d);
    if (len == 0.0) continue;
    // Outward normal x-component times arclength element: n_x ds = dy.
    for (std::size_t qId = 0; qId < g.x.size(); ++qId) {
      const double t = 0.5 * (g.x[qId] + 1.0);
      const double x = a.x + t * d.x;
      const double y = a.y + t * d.y;
      total += 0.5 * g.w[qId] * std::pow(x, i + 1) * std::pow(y, j) / (i + 1) * d.y;
    }
  }
  return total;
}

}  // namespace maxhdg
