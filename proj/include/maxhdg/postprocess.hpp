// Element-local post-processing: recover a vector field one degree richer
// whose curl is the best Galerkin match to the discrete flux, constrained to
// share element-mean gradients with the discrete field. Solved in the
// multiplier (saddle-point) form; the multipliers vanish in exact arithmetic
// and are reported as diagnostics.
#pragma once

#include <Eigen/Dense>

#include "maxhdg/spaces.hpp"

namespace maxhdg {

struct PostprocessedField {
  Eigen::VectorXcd ustar;   // coefficients in Wstar(K)
  Eigen::VectorXcd eta;     // scalar multiplier in Vstar(K)
  Complex gamma{0.0, 0.0};  // constant multiplier (pointwise value)
  double eta_norm = 0.0;    // L2 norm of eta (should vanish)
  double gamma_abs = 0.0;   // |gamma| (should vanish)
  double res_curl = 0.0;    // normalized residual of the curl Galerkin relation
  double res_grad = 0.0;    // normalized residual of the mean-gradient relation
};

// Solves the square saddle system on one element for (ustar, eta, gamma).
// q_h / u_h are coefficient vectors in fam.V / fam.W. Throws InternalError if
// the saddle matrix is singular (it is provably invertible, so a singular
// matrix signals an assembly bug).
PostprocessedField postprocess_element(const SpaceFamily& fam, const Eigen::VectorXcd& q_h,
                                       const Eigen::VectorXcd& u_h);

// Pointwise curl of the post-processed field as a callable.
ScalarField curl_of_postprocessed(const SpaceFamily& fam, const Eigen::VectorXcd& ustar);

}  // namespace maxhdg
