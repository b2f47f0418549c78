#include "maxhdg/mdecomp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

#include "maxhdg/errors.hpp"

namespace maxhdg {

namespace {

constexpr double kInclusionTol = 1e-10;  // relative projection residuals

// Boundary quadrature points (and sqrt-weights) over all edges of an element.
struct BoundaryPoints {
  std::vector<Vec2> pts;
  std::vector<double> sqrt_w;
  std::vector<int> edge_of;  // edge index of each point
};

BoundaryPoints boundary_points(const ElementGeometry& element, int degree) {
  BoundaryPoints b;
  for (std::size_t ei = 0; ei < element.edge.size(); ++ei) {
    const QuadRule rule = edge_rule(element.edge[ei], degree);
    for (const auto& qp : rule.points) {
      b.pts.push_back(qp.p);
      b.sqrt_w.push_back(std::sqrt(qp.w));
      b.edge_of.push_back(static_cast<int>(ei));
    }
  }
  return b;
}

// Rank of the weighted boundary values of the tangential trace family.
int trace_rank(const Eigen::MatrixXd& tangential_values, const std::vector<double>& sqrt_w) {
  Eigen::MatrixXd m = tangential_values;
  for (int q = 0; q < m.cols(); ++q) m.col(q) *= sqrt_w[static_cast<std::size_t>(q)];
  return numerical_rank(m);
}

// Values of the tangential component t.w at boundary points for a vector
// space; any unit tangent works for rank purposes, the element's ccw tangent
// (orientation * global tangent) is used for definiteness.
Eigen::MatrixXd tangential_values(const VectorSpace& s, const ElementGeometry& element,
                                  const BoundaryPoints& b) {
  const auto [wx, wy] = eval_vector(s, b.pts);
  Eigen::MatrixXd out(s.dim(), static_cast<int>(b.pts.size()));
  for (std::size_t q = 0; q < b.pts.size(); ++q) {
    const EdgeGeometry& e = element.edge[static_cast<std::size_t>(b.edge_of[q])];
    const Vec2 t = static_cast<double>(e.orientation) * e.tangent;
    for (int i = 0; i < s.dim(); ++i)
      out(i, static_cast<int>(q)) = t.x * wx(i, static_cast<int>(q)) + t.y * wy(i, static_cast<int>(q));
  }
  return out;
}

// Projection of the trace of each basis function onto the per-edge modal
// space of degree k, returned as modal coefficients together with the worst
// relative L2 residual of the projection. `values` holds per-point trace
// values (n_funcs x n_points).
struct TraceExpansion {
  Eigen::MatrixXd coeffs;  // n_modes_total x n_funcs
  double max_rel_residual = 0.0;
};

TraceExpansion expand_on_modes(const Eigen::MatrixXd& values, const ElementGeometry& element,
                               int k, int quad_degree) {
  const int n_edges = static_cast<int>(element.edge.size());
  const int n_funcs = static_cast<int>(values.rows());
  TraceExpansion out;
  out.coeffs = Eigen::MatrixXd::Zero(n_edges * (k + 1), n_funcs);
  std::vector<double> norm2(n_funcs, 0.0), res2(n_funcs, 0.0);
  int col0 = 0;
  for (int ei = 0; ei < n_edges; ++ei) {
    const EdgeGeometry& e = element.edge[static_cast<std::size_t>(ei)];
    const QuadRule rule = edge_rule(e, quad_degree);
    const int npts = static_cast<int>(rule.points.size());
    std::vector<Vec2> pts(rule.points.size());
    Eigen::VectorXd w(npts);
    for (int q = 0; q < npts; ++q) {
      pts[static_cast<std::size_t>(q)] = rule.points[static_cast<std::size_t>(q)].p;
      w(q) = rule.points[static_cast<std::size_t>(q)].w;
    }
    const Eigen::MatrixXd modes = edge_basis_values(e, k, pts);
    const Eigen::MatrixXd vals = values.middleCols(col0, npts);
    // Modal coefficients c = integral(v * L_m); modes are orthonormal.
    const Eigen::MatrixXd c = modes * w.asDiagonal() * vals.transpose();
    out.coeffs.middleRows(ei * (k + 1), k + 1) = c;
    const Eigen::MatrixXd recon = c.transpose() * modes;  // n_funcs x npts
    for (int i = 0; i < n_funcs; ++i)
      for (int q = 0; q < npts; ++q) {
        norm2[static_cast<std::size_t>(i)] += w(q) * vals(i, q) * vals(i, q);
        const double r = vals(i, q) - recon(i, q);
        res2[static_cast<std::size_t>(i)] += w(q) * r * r;
      }
    col0 += npts;
  }
  for (int i = 0; i < n_funcs; ++i) {
    const double rel = std::sqrt(res2[static_cast<std::size_t>(i)]) /
                       (1.0 + std::sqrt(norm2[static_cast<std::size_t>(i)]));
    out.max_rel_residual = std::max(out.max_rel_residual, rel);
  }
  return out;
}

// Relative residual of projecting the span given by `rows` onto the
// orthonormal space with coefficient rows `space_rows` (Gram metric `gram`).
double projection_residual(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& space_rows,
                           const Eigen::MatrixXd& gram) {
  if (rows.rows() == 0) return 0.0;
  const Eigen::MatrixXd proj = rows * gram * space_rows.transpose();  // inner products
  const Eigen::MatrixXd resid = rows - proj * space_rows;
  double worst = 0.0;
  for (int i = 0; i < rows.rows(); ++i) {
    const double n2 = rows.row(i) * gram * rows.row(i).transpose();
    const double r2 = resid.row(i) * gram * resid.row(i).transpose();
    worst = std::max(worst, std::sqrt(std::max(0.0, r2)) / (1.0 + std::sqrt(std::max(0.0, n2))));
  }
  return worst;
}

// Residual for vector spans (two coefficient blocks).
double projection_residual2(const Eigen::MatrixXd& rows_x, const Eigen::MatrixXd& rows_y,
                            const Eigen::MatrixXd& space_x, const Eigen::MatrixXd& space_y,
                            const Eigen::MatrixXd& gram) {
  if (rows_x.rows() == 0) return 0.0;
  const Eigen::MatrixXd proj =
      rows_x * gram * space_x.transpose() + rows_y * gram * space_y.transpose();
  const Eigen::MatrixXd rx = rows_x - proj * space_x;
  const Eigen::MatrixXd ry = rows_y - proj * space_y;
  double worst = 0.0;
  for (int i = 0; i < rows_x.rows(); ++i) {
    const double n2 = (rows_x.row(i) * gram * rows_x.row(i).transpose()).value() +
                      (rows_y.row(i) * gram * rows_y.row(i).transpose()).value();
    const double r2 = (rx.row(i) * gram * rx.row(i).transpose()).value() +
                      (ry.row(i) * gram * ry.row(i).transpose()).value();
    worst = std::max(worst, std::sqrt(std::max(0.0, r2)) / (1.0 + std::sqrt(std::max(0.0, n2))));
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// curl kernels

ScalarSpace curl_kernel(const ScalarSpace& s, const ElementGeometry& element) {
  ScalarSpace out;
  out.dict = s.dict;
  if (s.dim() == 0) {
    out.coef = Eigen::MatrixXd::Zero(0, s.dict.size());
    return out;
  }
  const Eigen::MatrixXd gram = dictionary_gram(s.dict, element);
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(gram).matrixL();
  const Eigen::MatrixXd gx = derivative_rows(s.coef, s.dict, true);
  const Eigen::MatrixXd gy = derivative_rows(s.coef, s.dict, false);
  Eigen::MatrixXd op(2 * s.dict.size(), s.dim());
  op.topRows(s.dict.size()) = (gx * L).transpose();
  op.bottomRows(s.dict.size()) = (gy * L).transpose();
  const Eigen::MatrixXd combos = null_space(op);
  out.coef = combos.transpose() * s.coef;
  return out;
}

VectorSpace curl_kernel(const VectorSpace& s, const ElementGeometry& element) {
  VectorSpace out;
  out.dict = s.dict;
  if (s.dim() == 0) {
    out.coef_x = Eigen::MatrixXd::Zero(0, s.dict.size());
    out.coef_y = out.coef_x;
    return out;
  }
  const Eigen::MatrixXd gram = dictionary_gram(s.dict, element);
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(gram).matrixL();
  const Eigen::MatrixXd op = (curl_rows(s) * L).transpose();
  const Eigen::MatrixXd combos = null_space(op);
  out.coef_x = combos.transpose() * s.coef_x;
  out.coef_y = combos.transpose() * s.coef_y;
  return out;
}

// ---------------------------------------------------------------------------
// trace dimensions and the index

int trace_dim(const ScalarSpace& s, const ElementGeometry& element, int quad_degree) {
  if (s.dim() == 0) return 0;
  if (quad_degree < 0) quad_degree = 2 * s.dict.maxdeg;
  const BoundaryPoints b = boundary_points(element, quad_degree);
  // n x v = -(ccw tangent) * v: the trace family has the rank of the plain
  // boundary values of v.
  return trace_rank(eval_scalar(s, b.pts), b.sqrt_w);
}

int trace_dim(const VectorSpace& s, const ElementGeometry& element, int quad_degree) {
  if (s.dim() == 0) return 0;
  if (quad_degree < 0) quad_degree = 2 * s.dict.maxdeg;
  const BoundaryPoints b = boundary_points(element, quad_degree);
  return trace_rank(tangential_values(s, element, b), b.sqrt_w);
}

int im_index(const SpaceFamily& fam) {
  const ScalarSpace kv = curl_kernel(fam.V, fam.element);
  const VectorSpace kw = curl_kernel(fam.W, fam.element);
  return fam.dim_M() - trace_dim(kv, fam.element) - trace_dim(kw, fam.element);
}

// ---------------------------------------------------------------------------
// full report

MDecompReport verify_conditions(const SpaceFamily& fam) {
  const ElementGeometry& el = fam.element;
  const int k = fam.edge_degree;
  const int quad_degree = 2 * fam.V.dict.maxdeg;

  MDecompReport rep;
  rep.tag = fam.tag;
  rep.degree = fam.degree;
  rep.dim_V = fam.V.dim();
  rep.dim_W = fam.W.dim();
  rep.dim_Vtilde = fam.Vtilde.dim();
  rep.dim_Wtilde = fam.Wtilde.dim();
  rep.dim_W0 = fam.W0.dim();
  rep.dim_M = fam.dim_M();

  const ScalarSpace kernel_v = curl_kernel(fam.V, el);
  const VectorSpace kernel_w = curl_kernel(fam.W, el);
  rep.dim_kernel_V = kernel_v.dim();
  rep.dim_kernel_W = kernel_w.dim();
  rep.trace_dim_V = trace_dim(kernel_v, el);
  rep.trace_dim_W = trace_dim(kernel_w, el);
  rep.im_index = rep.dim_M - rep.trace_dim_V - rep.trace_dim_W;

  const Eigen::MatrixXd gram = dictionary_gram(fam.V.dict, el);

  // (1) trace inclusions: boundary traces of V and W stay within the per-edge
  // modal space of degree k.
  const BoundaryPoints b = boundary_points(el, quad_degree);
  const TraceExpansion exp_v = expand_on_modes(eval_scalar(fam.V, b.pts), el, k, quad_degree);
  const TraceExpansion exp_w =
      expand_on_modes(tangential_values(fam.W, el, b), el, k, quad_degree);
  rep.max_inclusion_residual = std::max(exp_v.max_rel_residual, exp_w.max_rel_residual);
  rep.cond_inclusion_traces = rep.max_inclusion_residual <= kInclusionTol;

  // (2) curl inclusions: curl V inside W and curl W inside V.
  {
    const auto [cx, cy] = curl_rows(fam.V);
    const double r1 = projection_residual2(cx, cy, fam.W.coef_x, fam.W.coef_y, gram);
    const double r2 = projection_residual(curl_rows(fam.W), fam.V.coef, gram);
    rep.cond_inclusion_curls = std::max(r1, r2) <= kInclusionTol;
    rep.max_inclusion_residual = std::max({rep.max_inclusion_residual, r1, r2});
  }

  // (3) subspace property of the associated pair.
  {
    const double r1 = projection_residual(fam.Vtilde.coef, fam.V.coef, gram);
    const double r2 = projection_residual2(fam.Wtilde.coef_x, fam.Wtilde.coef_y, fam.W.coef_x,
                                           fam.W.coef_y, gram);
    rep.cond_subspaces = std::max(r1, r2) <= kInclusionTol;
    rep.max_inclusion_residual = std::max({rep.max_inclusion_residual, r1, r2});
  }

  // (4) non-degeneracy of M: mu = (tangent) * L_m has n x mu = L_m, whose
  // norm is 1 by orthonormality; verified by quadrature.
  {
    double min_norm = 1.0;
    for (const auto& e : el.edge) {
      const QuadRule rule = edge_rule(e, 2 * k);
      std::vector<Vec2> pts;
      for (const auto& qp : rule.points) pts.push_back(qp.p);
      const Eigen::MatrixXd modes = edge_basis_values(e, k, pts);
      for (int m = 0; m <= k; ++m) {
        double n2 = 0.0;
        for (std::size_t q = 0; q < pts.size(); ++q)
          n2 += rule.points[q].w * modes(m, static_cast<int>(q)) * modes(m, static_cast<int>(q));
        min_norm = std::min(min_norm, std::sqrt(n2));
      }
    }
    rep.cond_nondegenerate_M = min_norm > 1.0 - 1e-10;
  }

  // (5) combined trace isomorphism from (Vtilde-perp x Wtilde-perp) onto M:
  // modal coefficients of n x v-perp and n x w-perp x n, tested for full
  // rank dim_M.
  {
    // Orthogonal complements inside V and W via null spaces of the
    // inner-product matrices (all bases are orthonormal).
    const Eigen::MatrixXd pv = fam.Vtilde.coef * gram * fam.V.coef.transpose();
    const Eigen::MatrixXd vperp_combo = null_space(pv);
    const Eigen::MatrixXd vperp = vperp_combo.transpose() * fam.V.coef;

    const Eigen::MatrixXd pw = fam.Wtilde.coef_x * gram * fam.W.coef_x.transpose() +
                               fam.Wtilde.coef_y * gram * fam.W.coef_y.transpose();
    const Eigen::MatrixXd wperp_combo = null_space(pw);
    const Eigen::MatrixXd wperp_x = wperp_combo.transpose() * fam.W.coef_x;
    const Eigen::MatrixXd wperp_y = wperp_combo.transpose() * fam.W.coef_y;

    ScalarSpace vperp_space{fam.V.dict, vperp};
    VectorSpace wperp_space{fam.W.dict, wperp_x, wperp_y};

    // Components along the ccw tangent: n x v contributes -v, and
    // n x w x n contributes t.w; both expand on the same per-edge modes.
    const Eigen::MatrixXd vals_v = -eval_scalar(vperp_space, b.pts);
    const Eigen::MatrixXd vals_w = tangential_values(wperp_space, el, b);

    const TraceExpansion tv = expand_on_modes(vals_v, el, k, quad_degree);
    const TraceExpansion tw = expand_on_modes(vals_w, el, k, quad_degree);
    Eigen::MatrixXd trace_map(rep.dim_M, vperp_space.dim() + wperp_space.dim());
    trace_map.leftCols(vperp_space.dim()) = tv.coeffs;
    trace_map.rightCols(wperp_space.dim()) = tw.coeffs;

    if (trace_map.cols() == rep.dim_M && rep.dim_M > 0) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(trace_map);
      rep.min_trace_singular_value = svd.singularValues()(svd.singularValues().size() - 1);
      rep.tr_isomorphism = numerical_rank(trace_map) == rep.dim_M;
    } else {
      rep.min_trace_singular_value = 0.0;
      rep.tr_isomorphism = false;
    }
  }

  rep.dimension_identity =
      rep.dim_V + rep.dim_W == rep.dim_Vtilde + rep.dim_Wtilde + rep.dim_M;
  rep.verdict = rep.cond_inclusion_traces && rep.cond_inclusion_curls && rep.cond_subspaces &&
                rep.cond_nondegenerate_M && rep.tr_isomorphism;
  return rep;
}

std::string format_report(const MDecompReport& rep) {
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "tag: " << rep.tag << "\n"
     << "degree: " << rep.degree << "\n"
     << "dim_V: " << rep.dim_V << "\n"
     << "dim_W: " << rep.dim_W << "\n"
     << "dim_Vtilde: " << rep.dim_Vtilde << "\n"
     << "dim_Wtilde: " << rep.dim_Wtilde << "\n"
     << "dim_W0: " << rep.dim_W0 << "\n"
     << "dim_M: " << rep.dim_M << "\n"
     << "dim_kernel_V: " << rep.dim_kernel_V << "\n"
     << "dim_kernel_W: " << rep.dim_kernel_W << "\n"
     << "trace_dim_V: " << rep.trace_dim_V << "\n"
     << "trace_dim_W: " << rep.trace_dim_W << "\n"
     << "im_index: " << rep.im_index << "\n"
     << "cond_inclusion_traces: " << b(rep.cond_inclusion_traces) << "\n"
     << "cond_inclusion_curls: " << b(rep.cond_inclusion_curls) << "\n"
     << "cond_nondegenerate_M: " << b(rep.cond_nondegenerate_M) << "\n"
     << "cond_subspaces: " << b(rep.cond_subspaces) << "\n"
     << "tr_isomorphism: " << b(rep.tr_isomorphism) << "\n"
     << "dimension_identity: " << b(rep.dimension_identity) << "\n"
     << "max_inclusion_residual: " << rep.max_inclusion_residual << "\n"
     << "min_trace_singular_value: " << rep.min_trace_singular_value << "\n"
     << "verdict: " << b(rep.verdict) << "\n";
  return os.str();
}

}  // namespace maxhdg
