#include "maxhdg/postprocess.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

#include "maxhdg/errors.hpp"
#include "maxhdg/quadrature.hpp"

namespace maxhdg {

namespace {

Eigen::VectorXcd combine(const Eigen::MatrixXd& basis_vals, const Eigen::VectorXcd& coef) {
  Eigen::VectorXcd out(basis_vals.cols());
  out.real() = basis_vals.transpose() * coef.real();
  out.imag() = basis_vals.transpose() * coef.imag();
  return out;
}

}  // namespace

PostprocessedField postprocess_element(const SpaceFamily& fam, const Eigen::VectorXcd& q_h,
                                       const Eigen::VectorXcd& u_h) {
  if (q_h.size() != fam.V.dim() || u_h.size() != fam.W.dim()) {
    throw ConfigError("coefficient sizes do not match the element's V/W spaces");
  }
  const int nw = fam.Wstar.dim();
  const int nv = fam.Vstar.dim();
  const int n = nw + nv + 1;

  const QuadRule rule = element_rule(fam.element, fam.quad_bilinear);
  const std::size_t np = rule.points.size();
  std::vector<Vec2> pts(np);
  Eigen::VectorXd w(static_cast<Eigen::Index>(np));
  for (std::size_t p = 0; p < np; ++p) {
    pts[p] = rule.points[p].p;
    w[static_cast<Eigen::Index>(p)] = rule.points[p].w;
  }

  const Eigen::MatrixXd curls = eval_curl_vector(fam.Wstar, pts);  // nw x np
  const auto [wx, wy] = eval_vector(fam.Wstar, pts);
  const auto [gx, gy] = eval_grad(fam.Vstar, pts);
  const Eigen::MatrixXd vstar_vals = eval_scalar(fam.Vstar, pts);

  // Curl-curl block, gradient coupling, and the constant-multiplier column.
  const Eigen::MatrixXd curl_curl = curls * w.asDiagonal() * curls.transpose();
  const Eigen::MatrixXd grad_coupling =
      wx * w.asDiagonal() * gx.transpose() + wy * w.asDiagonal() * gy.transpose();
  const double shat = 1.0 / std::sqrt(fam.element.area);  // normalized constant
  const Eigen::VectorXd const_coupling = shat * (vstar_vals * w);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a.topLeftCorner(nw, nw) = curl_curl;
  a.block(0, nw, nw, nv) = grad_coupling;
  a.block(nw, 0, nv, nw) = grad_coupling.transpose();
  a.block(nw, nw + nv, nv, 1) = const_coupling;
  a.block(nw + nv, nw, 1, nv) = const_coupling.transpose();

  const Eigen::VectorXcd q_vals = combine(eval_scalar(fam.V, pts), q_h);
  const auto [ux_rows, uy_rows] = eval_vector(fam.W, pts);
  const Eigen::VectorXcd u_vals_x = combine(ux_rows, u_h);
  const Eigen::VectorXcd u_vals_y = combine(uy_rows, u_h);

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  for (int i = 0; i < nw; ++i) {
    Complex acc(0.0, 0.0);
    for (Eigen::Index p = 0; p < w.size(); ++p) acc += w[p] * q_vals[p] * curls(i, p);
    rhs[i] = acc;
  }
  for (int m = 0; m < nv; ++m) {
    Complex acc(0.0, 0.0);
    for (Eigen::Index p = 0; p < w.size(); ++p) {
      acc += w[p] * (u_vals_x[p] * gx(m, p) + u_vals_y[p] * gy(m, p));
    }
    rhs[nw + m] = acc;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw InternalError("post-processing saddle matrix is singular -- assembly bug");
  }
  Eigen::VectorXcd z(n);
  z.real() = lu.solve(Eigen::VectorXd(rhs.real()));
  z.imag() = lu.solve(Eigen::VectorXd(rhs.imag()));

  PostprocessedField out;
  out.ustar = z.head(nw);
  out.eta = z.segment(nw, nv);
  out.gamma = z[nw + nv] * shat;
  out.eta_norm = out.eta.norm();  // orthonormal basis: coefficient norm = L2 norm
  out.gamma_abs = std::abs(out.gamma);

  const double scale = 1.0 + q_h.norm() + u_h.norm();
  out.res_curl = (curl_curl.cast<Complex>() * out.ustar - rhs.head(nw)).norm() / scale;
  out.res_grad =
      (grad_coupling.transpose().cast<Complex>() * out.ustar - rhs.segment(nw, nv)).norm() /
      scale;
  return out;
}

ScalarField curl_of_postprocessed(const SpaceFamily& fam, const Eigen::VectorXcd& ustar) {
  if (ustar.size() != fam.Wstar.dim()) {
    throw ConfigError("coefficient size does not match the element's Wstar space");
  }
  return [fam, ustar](Vec2 p) -> Complex {
    const std::vector<Vec2> pts{p};
    const Eigen::MatrixXd curls = eval_curl_vector(fam.Wstar, pts);
    Complex acc(0.0, 0.0);
    for (int j = 0; j < fam.Wstar.dim(); ++j) acc += ustar[j] * curls(j, 0);
    return acc;
  };
}

}  // namespace maxhdg
