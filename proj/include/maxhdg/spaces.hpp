// Polynomial spaces on physical elements: centroid/h_K-normalized monomial
// dictionaries, orthonormalized scalar/vector bases, per-edge Legendre trace
// bases, and the per-element space bundles (V, W, M, Vtilde, Wtilde, W0 and
// the post-processing spaces Wstar, Vstar) for every supported construction.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "maxhdg/geometry.hpp"
#include "maxhdg/poly.hpp"
#include "maxhdg/quadrature.hpp"

namespace maxhdg {

using ScalarField = std::function<Complex(Vec2)>;
using VectorField = std::function<Eigen::Vector2cd(Vec2)>;

// Affine-normalized monomials X^a Y^b with X = (x - center.x)/scale,
// Y = (y - center.y)/scale, graded-lex ordered, total degree <= maxdeg.
struct MonomialDictionary {
  Vec2 center;
  double scale = 1.0;
  int maxdeg = 0;

  int size() const { return dict_size(maxdeg); }

  // size x npts value/derivative tables. Derivatives are with respect to the
  // physical coordinates (the 1/scale factor is included).
  Eigen::MatrixXd values(const std::vector<Vec2>& pts) const;
  Eigen::MatrixXd values_dx(const std::vector<Vec2>& pts) const;
  Eigen::MatrixXd values_dy(const std::vector<Vec2>& pts) const;
};

// Row i of coef holds the dictionary coefficients of basis function i.
struct ScalarSpace {
  MonomialDictionary dict;
  Eigen::MatrixXd coef;
  int dim() const { return static_cast<int>(coef.rows()); }
};

// Two dictionary blocks, one per component.
struct VectorSpace {
  MonomialDictionary dict;
  Eigen::MatrixXd coef_x;
  Eigen::MatrixXd coef_y;
  int dim() const { return static_cast<int>(coef_x.rows()); }
};

// --- evaluation (exact, no quadrature) --------------------------------------

Eigen::MatrixXd eval_scalar(const ScalarSpace& s, const std::vector<Vec2>& pts);
// Gradient (d/dx p, d/dy p) of each scalar basis function.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_grad(const ScalarSpace& s,
                                                      const std::vector<Vec2>& pts);
// Vector curl of a scalar: (d/dy p, -d/dx p).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_curl_scalar(const ScalarSpace& s,
                                                             const std::vector<Vec2>& pts);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_vector(const VectorSpace& s,
                                                        const std::vector<Vec2>& pts);
// Scalar curl of a vector: d/dx w_y - d/dy w_x.
Eigen::MatrixXd eval_curl_vector(const VectorSpace& s, const std::vector<Vec2>& pts);

// --- edge trace basis --------------------------------------------------------

// Orthonormal Legendre modes (arclength measure) of degree <= degree on the
// edge, parameterized along the edge's global orientation; (degree+1) x npts.
Eigen::MatrixXd edge_basis_values(const EdgeGeometry& edge, int degree,
                                  const std::vector<Vec2>& pts);

// L2 projection onto the edge modes: coef_m = integral of f * L_m ds.
Eigen::VectorXcd project_edge(const EdgeGeometry& edge, int degree, const ScalarField& f,
                              int quad_degree);

// L2 projections onto orthonormalized element spaces (coefficients are plain
// inner products because the Gram matrix is the identity).
Eigen::VectorXcd project_scalar(const ScalarSpace& s, const ElementGeometry& element,
                                const ScalarField& f, int quad_degree);
Eigen::VectorXcd project_vector(const VectorSpace& s, const ElementGeometry& element,
                                const VectorField& f, int quad_degree);

// Monomial Gram matrix of the dictionary over the element (exact quadrature).
Eigen::MatrixXd dictionary_gram(const MonomialDictionary& dict, const ElementGeometry& element);

// Dictionary-coefficient rows of the physical x- or y-derivative of functions
// given by dictionary-coefficient rows (the 1/scale factor is included).
Eigen::MatrixXd derivative_rows(const Eigen::MatrixXd& rows, const MonomialDictionary& dict,
                                bool wrt_x);

// Coefficient rows of the scalar curls (d/dx w_y - d/dy w_x) of a vector space.
Eigen::MatrixXd curl_rows(const VectorSpace& s);
// Coefficient rows (x, y blocks) of the vector curls (d/dy p, -d/dx p).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> curl_rows(const ScalarSpace& s);

// --- space families ----------------------------------------------------------

struct SpaceFamily {
  std::string tag;
  int degree = 0;  // k
  ElementGeometry element;

  ScalarSpace V;        // scalar space carrying q_h
  VectorSpace W;        // vector space carrying u_h
  ScalarSpace Vtilde;   // canonical curl(W)
  VectorSpace Wtilde;   // canonical curl(V) (+) W0
  VectorSpace W0;       // curl-free members of W with vanishing tangential trace
  VectorSpace Wstar;    // post-processing space [P_{k+1}]^2
  ScalarSpace Vstar;    // post-processing multiplier space P_{k+2}

  int edge_degree = 0;     // trace degree on each edge (= degree)
  int quad_bilinear = 0;   // quadrature exactness for bilinear forms

  int num_edges() const { return static_cast<int>(element.edge.size()); }
  int dim_M() const { return num_edges() * (edge_degree + 1); }
};

// Supported construction tags:
//   tri-pk            triangles, V = P_k, W = [P_k]^2 (k >= 1)
//   para-pk           parallelograms, V = P_k, W = [P_k]^2 (k >= 1; index 2)
//   quad-qk           squares, V = Q_k, W = [Q_k]^2 (k >= 1; index 2)
//   para-enriched-1   parallelograms, W enriched by two gradient fields (k >= 0)
//   para-enriched-2   additionally enriched by rotational fields (k >= 0)
//   quad-enriched-1   squares, gradient enrichment (k >= 1)
//   quad-enriched-2   squares, gradient + one divergence-type field (k >= 0)
//   table1-row1..4    the four lowest-order example rows (k fixed to 0)
std::vector<std::string> family_tags();
bool is_family_tag(const std::string& tag);
CellShape family_shape(const std::string& tag);
int family_min_degree(const std::string& tag);
// True for the tags whose degree is fixed at 0 (the table1 rows).
bool family_degree_fixed(const std::string& tag);

// Builds all member spaces of the construction on the element. Throws
// ConfigError for unknown tags, shape mismatches, or degrees outside the
// construction's admissible range.
SpaceFamily build_family(const std::string& tag, int k, const ElementGeometry& element);

// --- numerical rank helpers (shared by the certification module) -------------

inline constexpr double kRankRelTol = 1e-8;   // singular values below are zero
inline constexpr double kRankGuard = 10.0;    // ambiguity band above the tol

// Rank of a matrix by SVD with the relative threshold above; throws
// IndeterminateRankError when a singular value lands in the guard band.
int numerical_rank(const Eigen::MatrixXd& m);

// Orthonormal (coefficient-space) basis of the null space of m, with the same
// threshold/guard-band contract.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& m);

}  // namespace maxhdg
