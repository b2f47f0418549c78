// Assembly of the hybridized Maxwell system: element-local operator blocks,
// static condensation to the interior edge-trace unknowns, the sparse global
// solve, monolithic reference solve, and direct evaluation of the underlying
// sesquilinear form for structural tests.
#pragma once

#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <vector>

#include "maxhdg/mesh.hpp"
#include "maxhdg/spaces.hpp"

namespace maxhdg {

enum class ExecPolicy { serial, parallel };

// Coefficients and data of   curl (mu_r^-1 curl u) - kappa^2 eps_r u = f,
// n x u = g on the boundary, in first-order form with q = mu_r^-1 curl u.
struct ProblemSpec {
  double mu_r = 1.0;
  Complex eps_r{1.0, 0.0};
  double kappa = 1.0;
  double tau = 1.0;                // stabilization, constant unless overridden
  std::vector<double> tau_edge;    // optional per-mesh-edge override
  VectorField f;                   // volume source
  ScalarField g;                   // tangential boundary data (n x u)

  double edge_tau(int edge_id) const {
    return tau_edge.empty() ? tau : tau_edge.at(static_cast<std::size_t>(edge_id));
  }
  // Throws ConfigError on violated sign conditions or missing fields.
  void validate() const;
};

// Dense element blocks in the ordering x_i = [q; u], lambda = edge-major
// trace modes (global edge orientation). Rows follow the sesquilinear form:
// V rows, W rows, then trace rows.
struct LocalOperator {
  int n_v = 0;
  int n_w = 0;
  int n_m = 0;
  Eigen::MatrixXcd a_ii;  // (n_v+n_w) x (n_v+n_w)
  Eigen::MatrixXcd a_il;  // (n_v+n_w) x n_m
  Eigen::MatrixXcd a_li;  // n_m x (n_v+n_w)
  Eigen::MatrixXcd a_ll;  // n_m x n_m
  Eigen::VectorXcd b_i;   // [0; (f, psi)]
};

// Element contribution after eliminating (q, u): Schur block and load over
// the element's trace modes, plus the affine recovery x_i = recover_vec -
// recover_mat * lambda.
struct CondensedLocal {
  int n_v = 0;
  int n_w = 0;
  Eigen::MatrixXcd schur;
  Eigen::VectorXcd load;
  Eigen::MatrixXcd recover_mat;
  Eigen::VectorXcd recover_vec;
  Eigen::MatrixXcd a_li;  // kept for the independent flux-continuity check
  Eigen::MatrixXcd a_ll;
};

struct CondensedSystem {
  const Mesh* mesh = nullptr;  // must outlive the system
  std::string tag;
  int degree = 0;
  int modes_per_edge = 0;
  ProblemSpec spec;
  Eigen::SparseMatrix<Complex> matrix;  // interior trace dofs only
  Eigen::VectorXcd rhs;
  std::vector<int> edge_offset;                 // -1 for boundary edges
  std::vector<Eigen::VectorXcd> boundary_coeffs;  // trace data on boundary edges
  std::vector<CondensedLocal> local;            // per element
};

// Per-element/per-edge coefficient bundle of a discrete (q, u, uhat) triple.
struct GlobalFunctions {
  std::vector<Eigen::VectorXcd> q;     // per element, in V(K)
  std::vector<Eigen::VectorXcd> u;     // per element, in W(K)
  std::vector<Eigen::VectorXcd> uhat;  // per edge, modal (global orientation)
};

struct DiscreteSolution {
  GlobalFunctions fields;
  double solve_residual = 0.0;  // relative residual of the condensed solve
  double flux_residual = 0.0;   // interior flux-continuity residual (relative)
};

// Element bilinear blocks with quadrature exactness quad_bilinear. edge_tau
// holds one tau per local edge (empty = spec.tau everywhere).
LocalOperator assemble_local(const SpaceFamily& fam, const ProblemSpec& spec,
                             const std::vector<double>& edge_tau = {});

// Schur elimination of the interior block. Throws ResonanceError naming the
// element when the interior block is numerically singular.
CondensedLocal condense(const LocalOperator& op, int element_id = -1);

// Full condensed assembly; boundary trace coefficients are the edge modal
// projections of g (with the adjacent element's orientation sign) and are
// eliminated into the right-hand side. Deterministic for both policies.
CondensedSystem assemble_global(const Mesh& mesh, const std::string& tag, int k,
                                const ProblemSpec& spec,
                                ExecPolicy exec = ExecPolicy::parallel);

// Sparse LU solve + per-element recovery + flux-continuity verification.
DiscreteSolution solve(const CondensedSystem& sys);

// Reference path: one dense solve of the full (q, u, interior uhat) system
// with boundary traces eliminated. Small meshes only.
DiscreteSolution solve_monolithic(const Mesh& mesh, const std::string& tag, int k,
                                  const ProblemSpec& spec);

// The sesquilinear form evaluated on two discrete triples (conjugation on the
// second). Uses mu_r and tau from spec; exact quadrature.
Complex apply_b(const Mesh& mesh, const std::string& tag, int k, const ProblemSpec& spec,
                const GlobalFunctions& x, const GlobalFunctions& y);

// The form with a continuous first argument (q, its vector curl, u); the
// trace argument is the tangential trace of u, so the stabilization term
// vanishes identically. Used for Galerkin-consistency checks.
Complex apply_b_exact(const Mesh& mesh, const std::string& tag, int k, const ProblemSpec& spec,
                      const ScalarField& q, const VectorField& curl_q, const VectorField& u,
                      const GlobalFunctions& test, int quad_degree = 20);

// Volume load functional (f, v) against the test triple's vector part.
Complex load_functional(const Mesh& mesh, const std::string& tag, int k, const VectorField& f,
                        const GlobalFunctions& test, int quad_degree = 20);

// Sum over elements/edges of tau * || t.u - (trace part) ||_F^2 — the
// stabilization seminorm appearing in the energy identity.
double stabilization_seminorm_sq(const Mesh& mesh, const std::string& tag, int k,
                                 const ProblemSpec& spec, const GlobalFunctions& x);

// Projection of element L2 norms: sum_K ||q_K||^2 (orthonormal bases).
double l2_norm_sq_scalar(const GlobalFunctions& x);
double l2_norm_sq_vector(const GlobalFunctions& x);

}  // namespace maxhdg
