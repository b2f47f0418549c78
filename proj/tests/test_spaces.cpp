#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

using namespace maxhdg;
using namespace testutil;

namespace {

std::vector<Vec2> rule_points(const QuadRule& rule) {
  std::vector<Vec2> pts;
  pts.reserve(rule.points.size());
  for (const QuadPoint& qp : rule.points) pts.push_back(qp.p);
  return pts;
}

Eigen::VectorXd rule_weights(const QuadRule& rule) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(rule.points.size()));
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = rule.points[i].w;
  }
  return w;
}

double gram_identity_error(const Eigen::MatrixXd& vals, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd gram = vals * w.asDiagonal() * vals.transpose();
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
      .cwiseAbs()
      .maxCoeff();
}

double scalar_gram_error(const ScalarSpace& s, const ElementGeometry& el) {
  if (s.dim() == 0) return 0.0;
  const int degree = std::min(2 * s.dict.maxdeg, kMaxQuadratureDegree);
  const QuadRule rule = element_rule(el, degree);
  return gram_identity_error(eval_scalar(s, rule_points(rule)), rule_weights(rule));
}

double vector_gram_error(const VectorSpace& s, const ElementGeometry& el) {
  if (s.dim() == 0) return 0.0;
  const int degree = std::min(2 * s.dict.maxdeg, kMaxQuadratureDegree);
  const QuadRule rule = element_rule(el, degree);
  const auto [vx, vy] = eval_vector(s, rule_points(rule));
  const Eigen::VectorXd w = rule_weights(rule);
  const Eigen::MatrixXd gram =
      vx * w.asDiagonal() * vx.transpose() + vy * w.asDiagonal() * vy.transpose();
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

TEST_CASE("family tag catalogue") {
  const std::vector<std::string> tags = family_tags();
  for (const char* t :
       {"tri-pk", "para-pk", "quad-qk", "para-enriched-1", "para-enriched-2",
        "quad-enriched-1", "quad-enriched-2", "table1-row1", "table1-row2", "table1-row3",
        "table1-row4"}) {
    CHECK(std::find(tags.begin(), tags.end(), std::string(t)) != tags.end());
    CHECK(is_family_tag(t));
  }
  CHECK(!is_family_tag("no-such-tag"));
  CHECK(family_shape("tri-pk") == CellShape::triangle);
  CHECK(family_shape("para-enriched-2") == CellShape::parallelogram);
  CHECK(family_shape("quad-enriched-1") == CellShape::square);
  CHECK(family_degree_fixed("table1-row3"));
  CHECK(!family_degree_fixed("tri-pk"));
}

TEST_CASE("space dimensions per construction") {
  const ElementGeometry tri = skew_triangle();
  const ElementGeometry par = sheared_parallelogram();
  const ElementGeometry sq = offset_square_element();

  const SpaceFamily t1 = build_family("tri-pk", 1, tri);
  CHECK(t1.V.dim() == 3);
  CHECK(t1.W.dim() == 6);
  CHECK(t1.dim_M() == 6);
  CHECK(t1.Wstar.dim() == 12);  // [P_2]^2
  CHECK(t1.Vstar.dim() == 10);  // P_3

  const SpaceFamily t2 = build_family("tri-pk", 2, tri);
  CHECK(t2.V.dim() == 6);
  CHECK(t2.W.dim() == 12);
  CHECK(t2.W0.dim() == 1);
  CHECK(t2.dim_M() == 9);

  // Gradient enrichment adds two fields to [P_k]^2 on parallelograms.
  const SpaceFamily p1 = build_family("para-enriched-1", 1, par);
  CHECK(p1.W.dim() == 8);
  CHECK(p1.V.dim() == 3);
  CHECK(p1.dim_M() == 8);

  const SpaceFamily q1 = build_family("quad-qk", 1, sq);
  CHECK(q1.V.dim() == 4);   // Q_1
  CHECK(q1.W.dim() == 8);   // [Q_1]^2
  CHECK(q1.dim_M() == 8);

  const SpaceFamily qe1 = build_family("quad-enriched-1", 1, sq);
  CHECK(qe1.W.dim() == 10);
  const SpaceFamily qe2 = build_family("quad-enriched-2", 1, sq);
  CHECK(qe2.W.dim() == 11);

  // Lowest-order rows: trace degree 0, three/four edge modes total.
  const SpaceFamily r1 = build_family("table1-row1", 0, tri);
  CHECK(r1.V.dim() == 1);
  CHECK(r1.W.dim() == 2);
  CHECK(r1.dim_M() == 3);
  const SpaceFamily r3 = build_family("table1-row3", 0, sq);
  CHECK(r3.V.dim() == 1);
  CHECK(r3.W.dim() == 3);
  CHECK(r3.dim_M() == 4);
}

TEST_CASE("every member space is L2-orthonormal on its element") {
  struct Case {
    const char* tag;
    int k;
  };
  const std::vector<Case> cases = {{"tri-pk", 1},          {"tri-pk", 3},
                                   {"para-pk", 2},         {"quad-qk", 2},
                                   {"para-enriched-1", 2}, {"para-enriched-2", 1},
                                   {"quad-enriched-1", 2}, {"quad-enriched-2", 1},
                                   {"table1-row2", 0},     {"table1-row4", 0}};
  // Orthonormalizing the degree k+2 dictionary on a skewed element loses a
  // couple of digits; 1e-11 still certifies ~5 clean digits of headroom over
  // the 1e-10 contract tolerances downstream.
  for (const Case& c : cases) {
    CAPTURE(c.tag);
    CAPTURE(c.k);
    const ElementGeometry el = representative_element(c.tag);
    const SpaceFamily fam = build_family(c.tag, c.k, el);
    CHECK(scalar_gram_error(fam.V, el) < 1e-11);
    CHECK(scalar_gram_error(fam.Vtilde, el) < 1e-11);
    CHECK(scalar_gram_error(fam.Vstar, el) < 1e-11);
    CHECK(vector_gram_error(fam.W, el) < 1e-11);
    CHECK(vector_gram_error(fam.Wtilde, el) < 1e-11);
    CHECK(vector_gram_error(fam.W0, el) < 1e-11);
    CHECK(vector_gram_error(fam.Wstar, el) < 1e-11);
  }
}

TEST_CASE("projection onto an orthonormal space reproduces in-space functions") {
  auto eng = make_rng(71);
  for (const char* tag : {"tri-pk", "para-enriched-1", "quad-enriched-2"}) {
    const ElementGeometry el = representative_element(tag);
    const SpaceFamily fam = build_family(tag, 2, el);

    const Eigen::VectorXcd cs = random_coeffs(fam.V.dim(), eng);
    const Eigen::VectorXcd ps = project_scalar(fam.V, el, space_field(fam.V, cs), 20);
    CHECK(rel_diff(cs, ps) < 1e-12);

    const Eigen::VectorXcd cv = random_coeffs(fam.W.dim(), eng);
    const Eigen::VectorXcd pv = project_vector(fam.W, el, space_field(fam.W, cv), 24);
    CHECK(rel_diff(cv, pv) < 1e-12);
  }
}

TEST_CASE("projection of the zero field is zero") {
  const ElementGeometry el = unit_triangle();
  const SpaceFamily fam = build_family("tri-pk", 2, el);
  CHECK(project_scalar(fam.V, el, zero_scalar(), 10).norm() == 0.0);
  CHECK(project_vector(fam.W, el, zero_vector(), 10).norm() == 0.0);
}

TEST_CASE("edge projection: Galerkin orthogonality for a sine") {
  const ElementGeometry el = skew_triangle();
  const EdgeGeometry& edge = el.edge[2];
  const int k = 1;
  const ScalarField f = [](Vec2 p) -> Complex {
    return {std::sin(3.0 * p.x + 2.0 * p.y), 0.0};
  };
  const Eigen::VectorXcd coeffs = project_edge(edge, k, f, 30);
  REQUIRE(coeffs.size() == k + 1);

  // Independent oracle: residual of the projection is orthogonal to every mode.
  const QuadRule rule = edge_rule(edge, 30);
  std::vector<Vec2> pts = rule_points(rule);
  const Eigen::MatrixXd modes = edge_basis_values(edge, k, pts);
  for (int m = 0; m <= k; ++m) {
    Complex resid(0.0, 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Complex approx(0.0, 0.0);
      for (int j = 0; j <= k; ++j) {
        approx += coeffs[j] * modes(j, static_cast<Eigen::Index>(i));
      }
      resid += rule.points[i].w * (f(pts[i]) - approx) *
               modes(m, static_cast<Eigen::Index>(i));
    }
    CHECK(std::abs(resid) < 1e-12);
  }

  // Edge modes are orthonormal in the arclength measure.
  const Eigen::VectorXd w = rule_weights(rule);
  CHECK(gram_identity_error(modes, w) < 1e-12);
}

TEST_CASE("constants belong to the approximation subspaces for k >= 1") {
  struct Case {
    const char* tag;
    int k;
  };
  for (const Case& c : {Case{"tri-pk", 1}, Case{"para-enriched-1", 1},
                        Case{"para-enriched-2", 1}, Case{"quad-enriched-1", 1},
                        Case{"quad-enriched-2", 1}}) {
    CAPTURE(c.tag);
    const ElementGeometry el = representative_element(c.tag);
    const SpaceFamily fam = build_family(c.tag, c.k, el);

    const ScalarField one = [](Vec2) -> Complex { return {1.0, 0.0}; };
    const Eigen::VectorXcd pc = project_scalar(fam.Vtilde, el, one, 10);
    CHECK(elem_err_scalar(el, fam.Vtilde, pc, one, 10) < 1e-12);

    const VectorField cvec = [](Vec2) -> Eigen::Vector2cd {
      return {Complex(2.0, 0.0), Complex(-1.0, 0.0)};
    };
    const Eigen::VectorXcd pw = project_vector(fam.Wtilde, el, cvec, 10);
    CHECK(elem_err_vector(el, fam.Wtilde, pw, cvec, 10) < 1e-12);
  }
}

TEST_CASE("curl coefficient rows agree with direct curl evaluation") {
  const ElementGeometry el = sheared_parallelogram();
  const SpaceFamily fam = build_family("para-enriched-2", 2, el);
  const QuadRule rule = element_rule(el, 8);
  const std::vector<Vec2> pts = rule_points(rule);

  // Vector space: scalar curls.
  const Eigen::MatrixXd direct = eval_curl_vector(fam.W, pts);
  const Eigen::MatrixXd rows = curl_rows(fam.W);
  const Eigen::MatrixXd via_rows = rows * fam.W.dict.values(pts);
  CHECK((direct - via_rows).cwiseAbs().maxCoeff() < 1e-11);

  // Scalar space: vector curls (dy p, -dx p).
  const auto [cx, cy] = eval_curl_scalar(fam.V, pts);
  const auto [rx, ry] = curl_rows(fam.V);
  CHECK((cx - rx * fam.V.dict.values(pts)).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((cy - ry * fam.V.dict.values(pts)).cwiseAbs().maxCoeff() < 1e-11);

  // Gradients against derivative_rows.
  const auto [gx, gy] = eval_grad(fam.Vstar, pts);
  const Eigen::MatrixXd dgx = derivative_rows(fam.Vstar.coef, fam.Vstar.dict, true);
  const Eigen::MatrixXd dgy = derivative_rows(fam.Vstar.coef, fam.Vstar.dict, false);
  CHECK((gx - dgx * fam.Vstar.dict.values(pts)).cwiseAbs().maxCoeff() < 1e-11);
  CHECK((gy - dgy * fam.Vstar.dict.values(pts)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("curls of V land inside the W-side approximation space") {
  const ElementGeometry el = skew_triangle();
  const SpaceFamily fam = build_family("tri-pk", 2, el);
  const QuadRule rule = element_rule(el, 12);
  const std::vector<Vec2> pts = rule_points(rule);
  const Eigen::VectorXd w = rule_weights(rule);

  const auto [cx, cy] = eval_curl_scalar(fam.V, pts);
  const auto [wx, wy] = eval_vector(fam.Wtilde, pts);
  for (int i = 0; i < fam.V.dim(); ++i) {
    const Eigen::VectorXd fx = cx.row(i).transpose();
    const Eigen::VectorXd fy = cy.row(i).transpose();
    const double norm2 = (fx.array().square() * w.array()).sum() +
                         (fy.array().square() * w.array()).sum();
    if (norm2 < 1e-24) continue;
    double proj2 = 0.0;
    for (int m = 0; m < fam.Wtilde.dim(); ++m) {
      const double pm = ((wx.row(m).transpose().array() * fx.array() +
                          wy.row(m).transpose().array() * fy.array()) *
                         w.array())
                            .sum();
      proj2 += pm * pm;
    }
    CHECK(std::abs(norm2 - proj2) < 1e-10 * norm2);
  }
}

TEST_CASE("build_family rejects invalid configurations") {
  const ElementGeometry tri = unit_triangle();
  const ElementGeometry sq = unit_square_element();
  const ElementGeometry par = sheared_parallelogram();

  CHECK_THROWS_AS(build_family("bogus", 1, tri), ConfigError);
  CHECK_THROWS_AS(build_family("tri-pk", 0, tri), ConfigError);      // needs k >= 1
  CHECK_THROWS_AS(build_family("quad-enriched-1", 0, sq), ConfigError);
  CHECK_THROWS_AS(build_family("para-enriched-1", -1, par), ConfigError);
  CHECK_THROWS_AS(build_family("tri-pk", 1, sq), ConfigError);       // shape mismatch
  CHECK_THROWS_AS(build_family("quad-qk", 1, par), ConfigError);     // square tag, sheared cell
  CHECK_THROWS_AS(build_family("para-pk", 1, tri), ConfigError);
  CHECK_THROWS_AS(build_family("table1-row1", 1, tri), ConfigError);  // degree fixed at 0
  CHECK(build_family("table1-row1", 0, tri).V.dim() == 1);
}

TEST_CASE("numerical_rank: clean ranks and the indeterminate guard band") {
  Eigen::MatrixXd full = Eigen::MatrixXd::Identity(3, 3);
  CHECK(numerical_rank(full) == 3);

  Eigen::MatrixXd nearly = Eigen::MatrixXd::Zero(3, 3);
  nearly(0, 0) = 1.0;
  nearly(1, 1) = 1e-6;   // clearly above the guard band
  nearly(2, 2) = 1e-12;  // clearly below the zero threshold
  CHECK(numerical_rank(nearly) == 2);

  Eigen::MatrixXd ambiguous = Eigen::MatrixXd::Zero(2, 2);
  ambiguous(0, 0) = 1.0;
  ambiguous(1, 1) = 3e-8;  // inside [tol, 10 tol): a guess would be unsafe
  CHECK_THROWS_AS(numerical_rank(ambiguous), IndeterminateRankError);
  CHECK_THROWS_AS(null_space(ambiguous), IndeterminateRankError);
}

TEST_CASE("null_space returns an orthonormal kernel basis") {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, 1.0, 0.0,
       0.0, 0.0, 1.0;
  const Eigen::MatrixXd ns = null_space(m);
  REQUIRE(ns.rows() == 3);
  REQUIRE(ns.cols() == 1);
  CHECK((m * ns).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(ns.col(0).norm() - 1.0) < 1e-14);

  // Full-rank matrix: empty kernel.
  CHECK(null_space(Eigen::MatrixXd::Identity(3, 3)).cols() == 0);
}

TEST_CASE("trace degree equals the family degree on every edge") {
  for (const char* tag : {"tri-pk", "para-enriched-1", "quad-enriched-1"}) {
    const ElementGeometry el = representative_element(tag);
    const SpaceFamily fam = build_family(tag, 2, el);
    CHECK(fam.edge_degree == 2);
    CHECK(fam.dim_M() == fam.num_edges() * 3);
  }
}
