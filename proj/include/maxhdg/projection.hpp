// Element-local projection adapted to the trace decomposition: the coupled
// square system (volume rows over the associated subspaces + boundary modal
// rows) and the decoupled cross-check for the vector part.
#pragma once

#include "maxhdg/spaces.hpp"

namespace maxhdg {

struct ProjectionPair {
  Eigen::VectorXcd q;      // coefficients in V
  Eigen::VectorXcd u;      // coefficients in W
  double residual = 0.0;   // relative residual of the defining equations
  double condition = 0.0;  // spectral condition number of the system matrix
};

// Joint projection of (q, u): volume moments against Vtilde and Wtilde plus,
// on every edge mode m, <Pi_V q - tau t.Pi_W u, L_m> = <q - tau t.u, L_m>
// (t the ccw tangent). The system is square exactly when the family's
// dimension identity holds; quad_degree < 0 picks
// max(quad_bilinear, 20) for the data integrals.
ProjectionPair hdg_project(const SpaceFamily& fam, double tau, const ScalarField& q,
                           const VectorField& u, int quad_degree = -1);

// Decoupled computation of the vector part: moments against Wtilde plus
// boundary rows tau<t.Pi_W u, t.w> = (curl q, w)_K + tau<t.u, t.w> over an
// orthonormal basis w of the complement of Wtilde in W. `curl_q` supplies the
// vector curl (dy q, -dx q) of the scalar field projected jointly above.
Eigen::VectorXcd decoupled_project_w(const SpaceFamily& fam, double tau,
                                     const VectorField& curl_q, const VectorField& u,
                                     int quad_degree = -1);

// Condition number of the joint projection matrix (finite iff the family
// supports a well-posed projection).
double projection_condition(const SpaceFamily& fam, double tau);

}  // namespace maxhdg
