#include "maxhdg/projection.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>

#include "maxhdg/errors.hpp"

namespace maxhdg {

namespace {

// <f, L_m>_F moments of scalar boundary data over all edges (ccw-tangent
// convention is applied by the caller), stacked edge-major.
// Boundary modal moments of the V basis: row (F, m), column j = <v_j, L_m>_F.
Eigen::MatrixXd boundary_moments_scalar(const SpaceFamily& fam, int quad_degree) {
  const int k = fam.edge_degree;
  const int n_edges = fam.num_edges();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_edges * (k + 1), fam.V.dim());
  for (int ei = 0; ei < n_edges; ++ei) {
    const EdgeGeometry& e = fam.element.edge[static_cast<std::size_t>(ei)];
    const QuadRule rule = edge_rule(e, quad_degree);
    std::vector<Vec2> pts;
    for (const auto& qp : rule.points) pts.push_back(qp.p);
    const Eigen::MatrixXd modes = edge_basis_values(e, k, pts);
    const Eigen::MatrixXd vals = eval_scalar(fam.V, pts);
    Eigen::VectorXd w(static_cast<int>(rule.points.size()));
    for (std::size_t q = 0; q < rule.points.size(); ++q) w(static_cast<int>(q)) = rule.points[q].w;
    out.middleRows(ei * (k + 1), k + 1) = modes * w.asDiagonal() * vals.transpose();
  }
  return out;
}

// Row (F, m), column j = <t.w_j, L_m>_F with t the ccw tangent.
Eigen::MatrixXd boundary_moments_tangential(const SpaceFamily& fam, const VectorSpace& space,
                                            int quad_degree) {
  const int k = fam.edge_degree;
  const int n_edges = fam.num_edges();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_edges * (k + 1), space.dim());
  for (int ei = 0; ei < n_edges; ++ei) {
    const EdgeGeometry& e = fam.element.edge[static_cast<std::size_t>(ei)];
    const Vec2 t = static_cast<double>(e.orientation) * e.tangent;
    const QuadRule rule = edge_rule(e, quad_degree);
    std::vector<Vec2> pts;
    for (const auto& qp : rule.points) pts.push_back(qp.p);
    const Eigen::MatrixXd modes = edge_basis_values(e, k, pts);
    const auto [wx, wy] = eval_vector(space, pts);
    Eigen::MatrixXd tw(space.dim(), static_cast<int>(pts.size()));
    for (std::size_t q = 0; q < pts.size(); ++q)
      for (int j = 0; j < space.dim(); ++j)
        tw(j, static_cast<int>(q)) = t.x * wx(j, static_cast<int>(q)) + t.y * wy(j, static_cast<int>(q));
    Eigen::VectorXd w(static_cast<int>(rule.points.size()));
    for (std::size_t q = 0; q < rule.points.size(); ++q) w(static_cast<int>(q)) = rule.points[q].w;
    out.middleRows(ei * (k + 1), k + 1) = modes * w.asDiagonal() * tw.transpose();
  }
  return out;
}

// Boundary modal moments <g, L_m>_F of point-evaluable scalar data.
Eigen::VectorXcd boundary_moments_data(const SpaceFamily& fam,
                                       const std::function<Complex(const EdgeGeometry&, Vec2)>& g,
                                       int quad_degree) {
  const int k = fam.edge_degree;
  const int n_edges = fam.num_edges();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n_edges * (k + 1));
  for (int ei = 0; ei < n_edges; ++ei) {
    const EdgeGeometry& e = fam.element.edge[static_cast<std::size_t>(ei)];
    const QuadRule rule = edge_rule(e, quad_degree);
    std::vector<Vec2> pts;
    for (const auto& qp : rule.points) pts.push_back(qp.p);
    const Eigen::MatrixXd modes = edge_basis_values(e, k, pts);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const Complex gv = g(e, pts[q]) * rule.points[q].w;
      for (int m = 0; m <= k; ++m) out(ei * (k + 1) + m) += modes(m, static_cast<int>(q)) * gv;
    }
  }
  return out;
}

struct ProjectionSystem {
  Eigen::MatrixXd matrix;  // rows: Vtilde, Wtilde, boundary modes
  int n_v = 0;
  int n_w = 0;
};

ProjectionSystem projection_matrix(const SpaceFamily& fam, double tau) {
  const Eigen::MatrixXd gram = dictionary_gram(fam.V.dict, fam.element);
  const int n_v = fam.V.dim(), n_w = fam.W.dim();
  const int n_vt = fam.Vtilde.dim(), n_wt = fam.Wtilde.dim();
  const int n_m = fam.dim_M();
  if (n_vt + n_wt + n_m != n_v + n_w)
    throw ConfigError("projection system is not square (dim Vtilde + dim Wtilde + dim M != "
                      "dim V + dim W): the family does not admit the required decomposition");

  ProjectionSystem sys;
  sys.n_v = n_v;
  sys.n_w = n_w;
  sys.matrix = Eigen::MatrixXd::Zero(n_v + n_w, n_v + n_w);
  // Volume moment rows.
  sys.matrix.block(0, 0, n_vt, n_v) = fam.Vtilde.coef * gram * fam.V.coef.transpose();
  sys.matrix.block(n_vt, n_v, n_wt, n_w) =
      fam.Wtilde.coef_x * gram * fam.W.coef_x.transpose() +
      fam.Wtilde.coef_y * gram * fam.W.coef_y.transpose();
  // Boundary modal rows (polynomial integrands: quad_bilinear is exact).
  sys.matrix.block(n_vt + n_wt, 0, n_m, n_v) = boundary_moments_scalar(fam, fam.quad_bilinear);
  sys.matrix.block(n_vt + n_wt, n_v, n_m, n_w) =
      -tau * boundary_moments_tangential(fam, fam.W, fam.quad_bilinear);
  return sys;
}

}  // namespace

ProjectionPair hdg_project(const SpaceFamily& fam, double tau, const ScalarField& q,
                           const VectorField& u, int quad_degree) {
  if (!(tau > 0.0)) throw ConfigError("projection requires a positive stabilization tau");
  if (quad_degree < 0) quad_degree = std::max(fam.quad_bilinear, 20);
  const ProjectionSystem sys = projection_matrix(fam, tau);
  const int n_vt = fam.Vtilde.dim(), n_wt = fam.Wtilde.dim();

  Eigen::VectorXcd rhs(sys.n_v + sys.n_w);
  rhs.head(n_vt) = project_scalar(fam.Vtilde, fam.element, q, quad_degree);
  rhs.segment(n_vt, n_wt) = project_vector(fam.Wtilde, fam.element, u, quad_degree);
  rhs.tail(fam.dim_M()) = boundary_moments_data(
      fam,
      [&](const EdgeGeometry& e, Vec2 p) {
        const Vec2 t = static_cast<double>(e.orientation) * e.tangent;
        const Eigen::Vector2cd uv = u(p);
        return q(p) - tau * (t.x * uv(0) + t.y * uv(1));
      },
      quad_degree);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1), smax = sv(0);
  if (!(smin > 1e-12 * smax))
    throw InternalError("projection matrix is numerically singular: decomposition failure");

  ProjectionPair out;
  const Eigen::VectorXcd x =
      svd.solve(rhs.real().eval()).cast<Complex>() +
      Complex(0.0, 1.0) * svd.solve(rhs.imag().eval()).cast<Complex>();
  out.q = x.head(sys.n_v);
  out.u = x.tail(sys.n_w);
  out.condition = smax / smin;
  out.residual = (sys.matrix.cast<Complex>() * x - rhs).norm() / (1.0 + rhs.norm());
  return out;
}

Eigen::VectorXcd decoupled_project_w(const SpaceFamily& fam, double tau,
                                     const VectorField& curl_q, const VectorField& u,
                                     int quad_degree) {
  if (!(tau > 0.0)) throw ConfigError("projection requires a positive stabilization tau");
  if (quad_degree < 0) quad_degree = std::max(fam.quad_bilinear, 20);
  const Eigen::MatrixXd gram = dictionary_gram(fam.W.dict, fam.element);
  const int n_w = fam.W.dim(), n_wt = fam.Wtilde.dim();

  // Orthonormal basis of the complement of Wtilde inside W.
  const Eigen::MatrixXd pw = fam.Wtilde.coef_x * gram * fam.W.coef_x.transpose() +
                             fam.Wtilde.coef_y * gram * fam.W.coef_y.transpose();
  const Eigen::MatrixXd combos = null_space(pw);
  VectorSpace wperp{fam.W.dict, combos.transpose() * fam.W.coef_x,
                    combos.transpose() * fam.W.coef_y};
  if (n_wt + wperp.dim() != n_w)
    throw InternalError("complement of Wtilde in W has inconsistent dimension");

  Eigen::MatrixXd m(n_w, n_w);
  m.topRows(n_wt) = pw;  // volume rows against Wtilde
  // Boundary rows: tau * <t.w_j, t.wperp_i>_dK over the complement basis.
  Eigen::MatrixXd bnd = Eigen::MatrixXd::Zero(wperp.dim(), n_w);
  for (int ei = 0; ei < fam.num_edges(); ++ei) {
    const EdgeGeometry& e = fam.element.edge[static_cast<std::size_t>(ei)];
    const QuadRule rule = edge_rule(e, fam.quad_bilinear);
    std::vector<Vec2> pts;
    for (const auto& qp : rule.points) pts.push_back(qp.p);
    const auto [wx, wy] = eval_vector(fam.W, pts);
    const auto [px, py] = eval_vector(wperp, pts);
    const Vec2 t = static_cast<double>(e.orientation) * e.tangent;
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const double w = rule.points[q].w;
      for (int i = 0; i < wperp.dim(); ++i) {
        const double tp = t.x * px(i, static_cast<int>(q)) + t.y * py(i, static_cast<int>(q));
        for (int j = 0; j < n_w; ++j) {
          const double twj = t.x * wx(j, static_cast<int>(q)) + t.y * wy(j, static_cast<int>(q));
          bnd(i, j) += w * tau * tp * twj;
        }
      }
    }
  }
  m.bottomRows(wperp.dim()) = bnd;

  Eigen::VectorXcd rhs(n_w);
  rhs.head(n_wt) = project_vector(fam.Wtilde, fam.element, u, quad_degree);
  // (curl q, wperp_i)_K + tau <t.u, t.wperp_i>_dK.
  Eigen::VectorXcd lower = project_vector(wperp, fam.element, curl_q, quad_degree);
  for (int ei = 0; ei < fam.num_edges(); ++ei) {
    const EdgeGeometry& e = fam.element.edge[static_cast<std::size_t>(ei)];
    const QuadRule rule = edge_rule(e, quad_degree);
    std::vector<Vec2> pts;
    for (const auto& qp : rule.points) pts.push_back(qp.p);
    const auto [px, py] = eval_vector(wperp, pts);
    const Vec2 t = static_cast<double>(e.orientation) * e.tangent;
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const Eigen::Vector2cd uv = u(pts[q]);
      const Complex tu = t.x * uv(0) + t.y * uv(1);
      for (int i = 0; i < wperp.dim(); ++i) {
        const double tp = t.x * px(i, static_cast<int>(q)) + t.y * py(i, static_cast<int>(q));
        lower(i) += rule.points[q].w * tau * tp * tu;
      }
    }
  }
  rhs.tail(wperp.dim()) = lower;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0)))
    throw InternalError("decoupled projection matrix is numerically singular");
  return svd.solve(rhs.real().eval()).cast<Complex>() +
         Complex(0.0, 1.0) * svd.solve(rhs.imag().eval()).cast<Complex>();
}

double projection_condition(const SpaceFamily& fam, double tau) {
  const ProjectionSystem sys = projection_matrix(fam, tau);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.matrix);
  const Eigen::VectorXd& sv = svd.singularValues();
  return sv(0) / sv(sv.size() - 1);
}

}  // namespace maxhdg
