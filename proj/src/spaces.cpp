#include "maxhdg/spaces.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "maxhdg/errors.hpp"

namespace maxhdg {

namespace {

// ---------------------------------------------------------------------------
// dictionary tables

// Per-point normalized coordinates.
inline void normalized_coords(const MonomialDictionary& d, const Vec2& p, double& X, double& Y) {
  X = (p.x - d.center.x) / d.scale;
  Y = (p.y - d.center.y) / d.scale;
}

}  // namespace

Eigen::MatrixXd MonomialDictionary::values(const std::vector<Vec2>& pts) const {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd out(size(), n);
  std::vector<double> px(maxdeg + 1), py(maxdeg + 1);
  for (int q = 0; q < n; ++q) {
    double X, Y;
    normalized_coords(*this, pts[q], X, Y);
    px[0] = py[0] = 1.0;
    for (int a = 1; a <= maxdeg; ++a) {
      px[a] = px[a - 1] * X;
      py[a] = py[a - 1] * Y;
    }
    for (int i = 0; i < size(); ++i) {
      auto [a, b] = dict_powers(i);
      out(i, q) = px[a] * py[b];
    }
  }
  return out;
}

Eigen::MatrixXd MonomialDictionary::values_dx(const std::vector<Vec2>& pts) const {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd out(size(), n);
  std::vector<double> px(maxdeg + 1), py(maxdeg + 1);
  for (int q = 0; q < n; ++q) {
    double X, Y;
    normalized_coords(*this, pts[q], X, Y);
    px[0] = py[0] = 1.0;
    for (int a = 1; a <= maxdeg; ++a) {
      px[a] = px[a - 1] * X;
      py[a] = py[a - 1] * Y;
    }
    for (int i = 0; i < size(); ++i) {
      auto [a, b] = dict_powers(i);
      out(i, q) = (a == 0) ? 0.0 : a * px[a - 1] * py[b] / scale;
    }
  }
  return out;
}

Eigen::MatrixXd MonomialDictionary::values_dy(const std::vector<Vec2>& pts) const {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd out(size(), n);
  std::vector<double> px(maxdeg + 1), py(maxdeg + 1);
  for (int q = 0; q < n; ++q) {
    double X, Y;
    normalized_coords(*this, pts[q], X, Y);
    px[0] = py[0] = 1.0;
    for (int a = 1; a <= maxdeg; ++a) {
      px[a] = px[a - 1] * X;
      py[a] = py[a - 1] * Y;
    }
    for (int i = 0; i < size(); ++i) {
      auto [a, b] = dict_powers(i);
      out(i, q) = (b == 0) ? 0.0 : b * px[a] * py[b - 1] / scale;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// evaluation

Eigen::MatrixXd eval_scalar(const ScalarSpace& s, const std::vector<Vec2>& pts) {
  if (s.dim() == 0) return Eigen::MatrixXd::Zero(0, static_cast<int>(pts.size()));
  return s.coef * s.dict.values(pts);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_grad(const ScalarSpace& s,
                                                      const std::vector<Vec2>& pts) {
  if (s.dim() == 0) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(0, static_cast<int>(pts.size()));
    return {z, z};
  }
  return {s.coef * s.dict.values_dx(pts), s.coef * s.dict.values_dy(pts)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_curl_scalar(const ScalarSpace& s,
                                                             const std::vector<Vec2>& pts) {
  auto [gx, gy] = eval_grad(s, pts);
  return {gy, -gx};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_vector(const VectorSpace& s,
                                                        const std::vector<Vec2>& pts) {
  if (s.dim() == 0) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(0, static_cast<int>(pts.size()));
    return {z, z};
  }
  Eigen::MatrixXd vals = s.dict.values(pts);
  return {s.coef_x * vals, s.coef_y * vals};
}

Eigen::MatrixXd eval_curl_vector(const VectorSpace& s, const std::vector<Vec2>& pts) {
  if (s.dim() == 0) return Eigen::MatrixXd::Zero(0, static_cast<int>(pts.size()));
  return s.coef_y * s.dict.values_dx(pts) - s.coef_x * s.dict.values_dy(pts);
}

// ---------------------------------------------------------------------------
// edge trace basis

Eigen::MatrixXd edge_basis_values(const EdgeGeometry& edge, int degree,
                                  const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd out(degree + 1, n);
  const Vec2 mid{0.5 * (edge.a.x + edge.b.x), 0.5 * (edge.a.y + edge.b.y)};
  for (int q = 0; q < n; ++q) {
    const double t =
        2.0 * ((pts[q].x - mid.x) * edge.tangent.x + (pts[q].y - mid.y) * edge.tangent.y) /
        edge.length;
    double pm1 = 0.0, p = 1.0;  // Legendre recurrence
    for (int m = 0; m <= degree; ++m) {
      out(m, q) = std::sqrt((2.0 * m + 1.0) / edge.length) * p;
      const double pnext = ((2.0 * m + 1.0) * t * p - m * pm1) / (m + 1.0);
      pm1 = p;
      p = pnext;
    }
  }
  return out;
}

Eigen::VectorXcd project_edge(const EdgeGeometry& edge, int degree, const ScalarField& f,
                              int quad_degree) {
  const QuadRule rule = edge_rule(edge, quad_degree);
  std::vector<Vec2> pts(rule.points.size());
  for (std::size_t i = 0; i < rule.points.size(); ++i) pts[i] = rule.points[i].p;
  const Eigen::MatrixXd basis = edge_basis_values(edge, degree, pts);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(degree + 1);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Complex fv = f(rule.points[q].p) * rule.points[q].w;
    for (int m = 0; m <= degree; ++m) out(m) += basis(m, q) * fv;
  }
  return out;
}

Eigen::VectorXcd project_scalar(const ScalarSpace& s, const ElementGeometry& element,
                                const ScalarField& f, int quad_degree) {
  const QuadRule rule = element_rule(element, quad_degree);
  std::vector<Vec2> pts(rule.points.size());
  for (std::size_t i = 0; i < rule.points.size(); ++i) pts[i] = rule.points[i].p;
  const Eigen::MatrixXd vals = eval_scalar(s, pts);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.dim());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Complex fv = f(rule.points[q].p) * rule.points[q].w;
    for (int i = 0; i < s.dim(); ++i) out(i) += vals(i, q) * fv;
  }
  return out;
}

Eigen::VectorXcd project_vector(const VectorSpace& s, const ElementGeometry& element,
                                const VectorField& f, int quad_degree) {
  const QuadRule rule = element_rule(element, quad_degree);
  std::vector<Vec2> pts(rule.points.size());
  for (std::size_t i = 0; i < rule.points.size(); ++i) pts[i] = rule.points[i].p;
  const auto [vx, vy] = eval_vector(s, pts);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(s.dim());
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Eigen::Vector2cd fv = f(rule.points[q].p) * rule.points[q].w;
    for (int i = 0; i < s.dim(); ++i) out(i) += vx(i, q) * fv(0) + vy(i, q) * fv(1);
  }
  return out;
}

Eigen::MatrixXd dictionary_gram(const MonomialDictionary& dict, const ElementGeometry& element) {
  const QuadRule rule = element_rule(element, 2 * dict.maxdeg);
  std::vector<Vec2> pts(rule.points.size());
  Eigen::VectorXd w(rule.points.size());
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    pts[i] = rule.points[i].p;
    w(static_cast<int>(i)) = rule.points[i].w;
  }
  const Eigen::MatrixXd vals = dict.values(pts);
  return vals * w.asDiagonal() * vals.transpose();
}

// ---------------------------------------------------------------------------
// derivative operators on dictionary coefficients

namespace {

// d/dX as a matrix on dictionary coefficient vectors; rows transform as
// rows * matrix.transpose().
Eigen::MatrixXd deriv_matrix(int maxdeg, bool wrt_x) {
  const int n = dict_size(maxdeg);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    auto [a, b] = dict_powers(i);
    if (wrt_x && a > 0) d(dict_index(a - 1, b), i) = a;
    if (!wrt_x && b > 0) d(dict_index(a, b - 1), i) = b;
  }
  return d;
}

}  // namespace

Eigen::MatrixXd derivative_rows(const Eigen::MatrixXd& rows, const MonomialDictionary& dict,
                                bool wrt_x) {
  return rows * deriv_matrix(dict.maxdeg, wrt_x).transpose() / dict.scale;
}

Eigen::MatrixXd curl_rows(const VectorSpace& s) {
  return derivative_rows(s.coef_y, s.dict, true) - derivative_rows(s.coef_x, s.dict, false);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> curl_rows(const ScalarSpace& s) {
  return {derivative_rows(s.coef, s.dict, false), -derivative_rows(s.coef, s.dict, true)};
}

// ---------------------------------------------------------------------------
// numerical rank with guard band

namespace {

// Splits singular values into nonzero/zero with an ambiguity band between
// kRankRelTol and kRankGuard*kRankRelTol (relative to the largest value).
int rank_from_singular_values(const Eigen::VectorXd& sv, const char* what) {
  if (sv.size() == 0) return 0;
  const double smax = sv(0);
  if (smax <= 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    const double rel = sv(i) / smax;
    if (rel >= kRankGuard * kRankRelTol) {
      ++rank;
    } else if (rel > kRankRelTol) {
      std::ostringstream msg;
      msg << "ambiguous numerical rank in " << what << ": relative singular value " << rel
          << " lies between " << kRankRelTol << " and " << kRankGuard * kRankRelTol;
      throw IndeterminateRankError(msg.str());
    }
  }
  return rank;
}

}  // namespace

int numerical_rank(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return rank_from_singular_values(svd.singularValues(), "numerical_rank");
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0)
    return Eigen::MatrixXd::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const int rank = rank_from_singular_values(svd.singularValues(), "null_space");
  return svd.matrixV().rightCols(m.cols() - rank);
}

// ---------------------------------------------------------------------------
// span extraction (L2-orthonormal bases from spanning lists)

namespace {

using VecPoly = std::array<Poly2, 2>;

Eigen::RowVectorXd coeff_row(const Poly2& p, int maxdeg) {
  const std::vector<double> c = p.dense_coeffs(maxdeg);
  return Eigen::Map<const Eigen::RowVectorXd>(c.data(), static_cast<int>(c.size()));
}

Eigen::MatrixXd rows_from_scalars(const std::vector<Poly2>& polys, int maxdeg) {
  Eigen::MatrixXd rows(polys.size(), dict_size(maxdeg));
  for (std::size_t i = 0; i < polys.size(); ++i)
    rows.row(static_cast<int>(i)) = coeff_row(polys[i], maxdeg);
  return rows;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rows_from_vectors(const std::vector<VecPoly>& polys,
                                                              int maxdeg) {
  Eigen::MatrixXd rx(polys.size(), dict_size(maxdeg));
  Eigen::MatrixXd ry(polys.size(), dict_size(maxdeg));
  for (std::size_t i = 0; i < polys.size(); ++i) {
    rx.row(static_cast<int>(i)) = coeff_row(polys[i][0], maxdeg);
    ry.row(static_cast<int>(i)) = coeff_row(polys[i][1], maxdeg);
  }
  return {rx, ry};
}

// Orthonormal basis (w.r.t. the Gram metric G = L L^T) of the row span.
ScalarSpace scalar_span(const MonomialDictionary& dict, const Eigen::MatrixXd& rows,
                        const Eigen::MatrixXd& L, const char* what) {
  ScalarSpace out;
  out.dict = dict;
  if (rows.rows() == 0) {
    out.coef = Eigen::MatrixXd::Zero(0, dict.size());
    return out;
  }
  const Eigen::MatrixXd X = rows * L;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const int rank = rank_from_singular_values(svd.singularValues(), what);
  out.coef = svd.matrixU().leftCols(rank).transpose() * rows;
  for (int i = 0; i < rank; ++i) out.coef.row(i) /= svd.singularValues()(i);
  return out;
}

VectorSpace vector_span(const MonomialDictionary& dict, const Eigen::MatrixXd& rows_x,
                        const Eigen::MatrixXd& rows_y, const Eigen::MatrixXd& L,
                        const char* what) {
  VectorSpace out;
  out.dict = dict;
  if (rows_x.rows() == 0) {
    out.coef_x = Eigen::MatrixXd::Zero(0, dict.size());
    out.coef_y = out.coef_x;
    return out;
  }
  Eigen::MatrixXd X(rows_x.rows(), 2 * dict.size());
  X.leftCols(dict.size()) = rows_x * L;
  X.rightCols(dict.size()) = rows_y * L;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const int rank = rank_from_singular_values(svd.singularValues(), what);
  const Eigen::MatrixXd combo = svd.matrixU().leftCols(rank).transpose();
  out.coef_x = combo * rows_x;
  out.coef_y = combo * rows_y;
  for (int i = 0; i < rank; ++i) {
    out.coef_x.row(i) /= svd.singularValues()(i);
    out.coef_y.row(i) /= svd.singularValues()(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// spanning lists

std::vector<Poly2> total_degree_monomials(int k) {
  std::vector<Poly2> out;
  if (k < 0) return out;
  for (int i = 0; i < dict_size(k); ++i) {
    auto [a, b] = dict_powers(i);
    out.push_back(Poly2::monomial(a, b));
  }
  return out;
}

std::vector<Poly2> homogeneous_monomials(int k) {
  std::vector<Poly2> out;
  for (int a = k; a >= 0; --a) out.push_back(Poly2::monomial(a, k - a));
  return out;
}

std::vector<Poly2> tensor_monomials(int k) {
  std::vector<Poly2> out;
  for (int a = 0; a <= k; ++a)
    for (int b = 0; b <= k; ++b) out.push_back(Poly2::monomial(a, b));
  return out;
}

std::vector<VecPoly> vectorize(const std::vector<Poly2>& scalars) {
  std::vector<VecPoly> out;
  out.reserve(2 * scalars.size());
  for (const auto& p : scalars) out.push_back({p, Poly2::zero()});
  for (const auto& p : scalars) out.push_back({Poly2::zero(), p});
  return out;
}

Poly2 poly_pow(const Poly2& base, int n) {
  Poly2 out = Poly2::constant(1.0);
  for (int i = 0; i < n; ++i) out = out * base;
  return out;
}

// Affine coordinates (xi, eta) aligned with the two edge directions of a
// parallelogram, centered at the element midpoint, expressed as linear
// polynomials in the dictionary variables (X, Y). Gradient enrichments must
// use these: in plain coordinates the tangential trace of the enrichment
// would exceed degree k on sheared edges.
std::pair<Poly2, Poly2> edge_aligned_coords(const ElementGeometry& el) {
  const Vec2 e1{el.vertex[1].x - el.vertex[0].x, el.vertex[1].y - el.vertex[0].y};
  const Vec2 e2{el.vertex[3].x - el.vertex[0].x, el.vertex[3].y - el.vertex[0].y};
  const double det = e1.x * e2.y - e1.y * e2.x;
  const Vec2 d{el.centroid.x - el.vertex[0].x, el.centroid.y - el.vertex[0].y};
  const double h = el.diameter;
  const Poly2 X = Poly2::monomial(1, 0), Y = Poly2::monomial(0, 1);
  Poly2 xi = Poly2::constant((e2.y * d.x - e2.x * d.y) / det - 0.5) +
             (h * e2.y / det) * X + (-h * e2.x / det) * Y;
  Poly2 eta = Poly2::constant((-e1.y * d.x + e1.x * d.y) / det - 0.5) +
              (-h * e1.y / det) * X + (h * e1.x / det) * Y;
  return {xi, eta};
}

// ∇ span{ xi^{k+1} eta, xi eta^{k+1} } (the k = 0 duplicate is harmless: span
// extraction removes it).
std::vector<VecPoly> gradient_enrichment(const ElementGeometry& el, int k) {
  auto [xi, eta] = edge_aligned_coords(el);
  std::vector<VecPoly> out;
  for (const Poly2& p : {poly_pow(xi, k + 1) * eta, xi * poly_pow(eta, k + 1)})
    out.push_back({p.dx(), p.dy()});
  return out;
}

// (Y, -X)^T * (homogeneous degree-k monomials); tangential component is
// constant along any straight edge, so traces stay within degree k.
std::vector<VecPoly> rotational_enrichment(int k) {
  const Poly2 X = Poly2::monomial(1, 0), Y = Poly2::monomial(0, 1);
  std::vector<VecPoly> out;
  for (const Poly2& p : homogeneous_monomials(k)) out.push_back({Y * p, -1.0 * (X * p)});
  return out;
}

struct TagInfo {
  CellShape shape;
  int min_k;
  bool degree_fixed;  // the table rows are lowest-order only
};

const std::map<std::string, TagInfo>& tag_table() {
  static const std::map<std::string, TagInfo> table = {
      {"tri-pk", {CellShape::triangle, 1, false}},
      {"para-pk", {CellShape::parallelogram, 1, false}},
      {"quad-qk", {CellShape::square, 1, false}},
      {"para-enriched-1", {CellShape::parallelogram, 0, false}},
      {"para-enriched-2", {CellShape::parallelogram, 0, false}},
      {"quad-enriched-1", {CellShape::square, 1, false}},
      {"quad-enriched-2", {CellShape::square, 0, false}},
      {"table1-row1", {CellShape::triangle, 0, true}},
      {"table1-row2", {CellShape::triangle, 0, true}},
      {"table1-row3", {CellShape::square, 0, true}},
      {"table1-row4", {CellShape::square, 0, true}},
  };
  return table;
}

void check_element_matches(const std::string& tag, const TagInfo& info,
                           const ElementGeometry& el) {
  const auto fail = [&](const std::string& why) {
    throw ConfigError("construction '" + tag + "': " + why);
  };
  if (info.shape == CellShape::triangle) {
    if (el.shape != CellShape::triangle) fail("requires a triangular element");
    return;
  }
  // Quadrilateral constructions: squares are admissible parallelograms.
  if (info.shape == CellShape::parallelogram) {
    if (el.shape != CellShape::parallelogram && el.shape != CellShape::square)
      fail("requires a parallelogram element");
  } else if (el.shape != CellShape::square) {
    fail("requires a square element");
  }
  if (el.vertex.size() != 4) fail("requires a four-vertex element");
  const double tol = 1e-12 * el.diameter;
  // Opposite vertices must share a midpoint (affine image of the unit square).
  if (std::abs(el.vertex[0].x + el.vertex[2].x - el.vertex[1].x - el.vertex[3].x) > tol ||
      std::abs(el.vertex[0].y + el.vertex[2].y - el.vertex[1].y - el.vertex[3].y) > tol)
    fail("element is not a parallelogram (diagonal midpoints differ)");
  if (info.shape == CellShape::square || el.shape == CellShape::square) {
    const Vec2 e1{el.vertex[1].x - el.vertex[0].x, el.vertex[1].y - el.vertex[0].y};
    const Vec2 e2{el.vertex[3].x - el.vertex[0].x, el.vertex[3].y - el.vertex[0].y};
    if (std::abs(e1.x * e2.x + e1.y * e2.y) > tol * el.diameter ||
        std::abs(norm(e1) - norm(e2)) > tol)
      fail("element tagged square is not a square");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// tag metadata

std::vector<std::string> family_tags() {
  std::vector<std::string> out;
  for (const auto& [tag, info] : tag_table()) out.push_back(tag);
  return out;
}

bool is_family_tag(const std::string& tag) { return tag_table().count(tag) > 0; }

CellShape family_shape(const std::string& tag) {
  auto it = tag_table().find(tag);
  if (it == tag_table().end()) throw ConfigError("unknown construction tag '" + tag + "'");
  return it->second.shape;
}

int family_min_degree(const std::string& tag) {
  auto it = tag_table().find(tag);
  if (it == tag_table().end()) throw ConfigError("unknown construction tag '" + tag + "'");
  return it->second.min_k;
}

bool family_degree_fixed(const std::string& tag) {
  auto it = tag_table().find(tag);
  if (it == tag_table().end()) throw ConfigError("unknown construction tag '" + tag + "'");
  return it->second.degree_fixed;
}

// ---------------------------------------------------------------------------
// build_family

SpaceFamily build_family(const std::string& tag, int k, const ElementGeometry& element) {
  auto it = tag_table().find(tag);
  if (it == tag_table().end()) throw ConfigError("unknown construction tag '" + tag + "'");
  const TagInfo& info = it->second;
  if (info.degree_fixed && k != 0)
    throw ConfigError("construction '" + tag + "' is lowest-order only (degree must be 0)");
  if (k < info.min_k)
    throw ConfigError("construction '" + tag + "' requires degree k >= " +
                      std::to_string(info.min_k));
  check_element_matches(tag, info, element);

  // Spanning lists in normalized dictionary coordinates.
  std::vector<Poly2> v_list;
  std::vector<VecPoly> w_list;
  const Poly2 X = Poly2::monomial(1, 0), Y = Poly2::monomial(0, 1);

  if (tag == "tri-pk" || tag == "para-pk") {
    v_list = total_degree_monomials(k);
    w_list = vectorize(total_degree_monomials(k));
  } else if (tag == "quad-qk") {
    v_list = tensor_monomials(k);
    w_list = vectorize(tensor_monomials(k));
  } else if (tag == "para-enriched-1" || tag == "para-enriched-2") {
    v_list = total_degree_monomials(k);
    w_list = vectorize(total_degree_monomials(k));
    for (auto& w : gradient_enrichment(element, k)) w_list.push_back(w);
    if (tag == "para-enriched-2")
      for (auto& w : rotational_enrichment(k)) w_list.push_back(w);
  } else if (tag == "quad-enriched-1" || tag == "quad-enriched-2") {
    v_list = tensor_monomials(k);
    w_list = vectorize(tensor_monomials(k));
    for (auto& w : gradient_enrichment(element, k)) w_list.push_back(w);
    if (tag == "quad-enriched-2")
      w_list.push_back({poly_pow(X, k) * poly_pow(Y, k + 1), poly_pow(X, k + 1) * poly_pow(Y, k)});
  } else if (tag == "table1-row1" || tag == "table1-row2") {
    v_list = total_degree_monomials(0);
    w_list = vectorize(total_degree_monomials(0));
    if (tag == "table1-row2") w_list.push_back({Y, -1.0 * X});
  } else {  // table1-row3 / table1-row4
    v_list = total_degree_monomials(0);
    w_list = vectorize(total_degree_monomials(0));
    w_list.push_back({Y, X});
    if (tag == "table1-row4") w_list.push_back({Y, -1.0 * X});
  }

  int maxdeg = k + 2;  // the post-processing multiplier space P_{k+2}
  for (const auto& p : v_list) maxdeg = std::max(maxdeg, p.degree());
  for (const auto& w : w_list) maxdeg = std::max(maxdeg, std::max(w[0].degree(), w[1].degree()));

  SpaceFamily fam;
  fam.tag = tag;
  fam.degree = k;
  fam.element = element;
  fam.edge_degree = k;
  fam.quad_bilinear = std::max(2 * k + 6, 2 * maxdeg);
  if (fam.quad_bilinear > kMaxQuadratureDegree)
    throw ConfigError("construction '" + tag + "' at degree " + std::to_string(k) +
                      " exceeds the available quadrature exactness");

  const MonomialDictionary dict{element.centroid, element.diameter, maxdeg};
  const Eigen::MatrixXd gram = dictionary_gram(dict, element);
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw InternalError("dictionary Gram matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  fam.V = scalar_span(dict, rows_from_scalars(v_list, maxdeg), L, "space V");
  {
    auto [rx, ry] = rows_from_vectors(w_list, maxdeg);
    fam.W = vector_span(dict, rx, ry, L, "space W");
  }
  {
    auto [rx, ry] = rows_from_vectors(vectorize(total_degree_monomials(k + 1)), maxdeg);
    fam.Wstar = vector_span(dict, rx, ry, L, "space Wstar");
  }
  fam.Vstar = scalar_span(dict, rows_from_scalars(total_degree_monomials(k + 2), maxdeg), L,
                          "space Vstar");

  const Eigen::MatrixXd DxT = deriv_matrix(maxdeg, true).transpose();
  const Eigen::MatrixXd DyT = deriv_matrix(maxdeg, false).transpose();

  // Canonical Vtilde = curl(W) (the only choice admitting an M-decomposition).
  const Eigen::MatrixXd curl_w_rows = fam.W.coef_y * DxT - fam.W.coef_x * DyT;
  fam.Vtilde = scalar_span(dict, curl_w_rows, L, "space Vtilde");

  // W0: members of W that are curl-free with vanishing tangential trace.
  {
    const Eigen::MatrixXd curl_block = (curl_w_rows * L).transpose();
    int n_bpts = 0;
    std::vector<QuadRule> edge_rules;
    for (const auto& e : element.edge) {
      edge_rules.push_back(edge_rule(e, 2 * maxdeg));
      n_bpts += static_cast<int>(edge_rules.back().points.size());
    }
    Eigen::MatrixXd trace_block(n_bpts, fam.W.dim());
    int row = 0;
    for (std::size_t ei = 0; ei < element.edge.size(); ++ei) {
      const auto& e = element.edge[ei];
      std::vector<Vec2> pts;
      for (const auto& qp : edge_rules[ei].points) pts.push_back(qp.p);
      const auto [wx, wy] = eval_vector(fam.W, pts);
      for (std::size_t q = 0; q < pts.size(); ++q) {
        const double sw = std::sqrt(edge_rules[ei].points[q].w);
        for (int j = 0; j < fam.W.dim(); ++j)
          trace_block(row, j) = sw * (e.tangent.x * wx(j, q) + e.tangent.y * wy(j, q));
        ++row;
      }
    }
    const double n1 = curl_block.norm(), n2 = trace_block.norm();
    Eigen::MatrixXd stacked(curl_block.rows() + trace_block.rows(), fam.W.dim());
    stacked.topRows(curl_block.rows()) = n1 > 0 ? (curl_block / n1).eval() : curl_block;
    stacked.bottomRows(trace_block.rows()) = n2 > 0 ? (trace_block / n2).eval() : trace_block;
    const Eigen::MatrixXd null_combos = null_space(stacked);
    fam.W0.dict = dict;
    fam.W0.coef_x = null_combos.transpose() * fam.W.coef_x;
    fam.W0.coef_y = null_combos.transpose() * fam.W.coef_y;
  }

  // Canonical Wtilde = curl(V) ⊕ W0.
  {
    Eigen::MatrixXd rx(fam.V.dim() + fam.W0.dim(), dict.size());
    Eigen::MatrixXd ry(fam.V.dim() + fam.W0.dim(), dict.size());
    rx.topRows(fam.V.dim()) = fam.V.coef * DyT;          // curl p = (dy p, -dx p)
    ry.topRows(fam.V.dim()) = -(fam.V.coef * DxT);
    rx.bottomRows(fam.W0.dim()) = fam.W0.coef_x;
    ry.bottomRows(fam.W0.dim()) = fam.W0.coef_y;
    fam.Wtilde = vector_span(dict, rx, ry, L, "space Wtilde");
  }

  return fam;
}

}  // namespace maxhdg
