// Numerical certification of trace decompositions: curl kernels, trace ranks,
// the M-index, and the full condition report (inclusions, index, combined
// trace isomorphism) for a space family on one element.
#pragma once

#include <string>

#include "maxhdg/spaces.hpp"

namespace maxhdg {

struct MDecompReport {
  std::string tag;
  int degree = 0;

  int dim_V = 0;
  int dim_W = 0;
  int dim_Vtilde = 0;
  int dim_Wtilde = 0;
  int dim_W0 = 0;
  int dim_M = 0;

  int dim_kernel_V = 0;   // curl-free subspace of V (constants)
  int dim_kernel_W = 0;   // curl-free subspace of W
  int trace_dim_V = 0;    // dim of the tangential traces of the V kernel
  int trace_dim_W = 0;    // dim of the tangential traces of the W kernel
  int im_index = 0;       // dim_M - trace_dim_V - trace_dim_W

  bool cond_inclusion_traces = false;    // n x V and n x W x n inside M
  bool cond_inclusion_curls = false;     // curl V inside W, curl W inside V
  bool cond_nondegenerate_M = false;     // n x mu = 0 forces mu = 0
  bool cond_subspaces = false;           // Vtilde inside V, Wtilde inside W
  bool tr_isomorphism = false;           // combined trace map bijective onto M
  bool dimension_identity = false;       // dim V + dim W = dim Vt + dim Wt + dim M
  bool verdict = false;                  // all decomposition conditions hold

  double max_inclusion_residual = 0.0;   // worst relative projection residual
  double min_trace_singular_value = 0.0; // smallest singular value of the trace map
};

// Orthonormal basis of the curl-free members ({v : grad v = 0} for scalars,
// {w : dx w_y - dy w_x = 0} for vectors). Every returned function has
// curl norm <= 1e-10.
ScalarSpace curl_kernel(const ScalarSpace& s, const ElementGeometry& element);
VectorSpace curl_kernel(const VectorSpace& s, const ElementGeometry& element);

// Dimension of the boundary trace families {n x v} (scalar) and {n x w x n}
// (vector): rank of the sqrt-weight scaled trace value matrix over all edge
// quadrature points. quad_degree < 0 chooses an exact default.
int trace_dim(const ScalarSpace& s, const ElementGeometry& element, int quad_degree = -1);
int trace_dim(const VectorSpace& s, const ElementGeometry& element, int quad_degree = -1);

// The decomposition index: dim M - (trace dim of V's curl kernel)
//                                - (trace dim of W's curl kernel).
// Throws IndeterminateRankError instead of guessing when a rank is ambiguous.
int im_index(const SpaceFamily& fam);

// Full condition report; verdict is true iff the family's (V, W) with the
// canonical (Vtilde, Wtilde) satisfy every decomposition condition.
MDecompReport verify_conditions(const SpaceFamily& fam);

// Fixed-order "key: value" rendering used by the command-line tool.
std::string format_report(const MDecompReport& report);

}  // namespace maxhdg
