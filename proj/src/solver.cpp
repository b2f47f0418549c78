#include "maxhdg/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "maxhdg/errors.hpp"
#include "maxhdg/quadrature.hpp"

namespace maxhdg {

namespace {

struct RulePoints {
  std::vector<Vec2> pts;
  Eigen::VectorXd w;
};

RulePoints unpack(const QuadRule& rule) {
  RulePoints out;
  const std::size_t n = rule.points.size();
  out.pts.resize(n);
  out.w.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.pts[i] = rule.points[i].p;
    out.w[static_cast<Eigen::Index>(i)] = rule.points[i].w;
  }
  return out;
}

// Values of the ccw-tangential component t.w_j of each vector basis function
// at the given edge points (rows = basis functions).
Eigen::MatrixXd ccw_tangential_values(const VectorSpace& s, const EdgeGeometry& edge,
                                      const std::vector<Vec2>& pts) {
  auto [vx, vy] = eval_vector(s, pts);
  const Vec2 t = static_cast<double>(edge.orientation) * edge.tangent;
  return t.x * vx + t.y * vy;
}

// Complex point values of sum_j coef_j * basis_j given real basis values
// (rows = basis functions, cols = points).
Eigen::VectorXcd combine(const Eigen::MatrixXd& basis_vals, const Eigen::VectorXcd& coef) {
  Eigen::VectorXcd out(basis_vals.cols());
  out.real() = basis_vals.transpose() * coef.real();
  out.imag() = basis_vals.transpose() * coef.imag();
  return out;
}

std::vector<double> resolve_edge_tau(const SpaceFamily& fam, const ProblemSpec& spec,
                                     const std::vector<double>& edge_tau) {
  const std::size_t ne = static_cast<std::size_t>(fam.num_edges());
  if (edge_tau.empty()) return std::vector<double>(ne, spec.tau);
  if (edge_tau.size() != ne) {
    throw ConfigError("per-edge stabilization list has " + std::to_string(edge_tau.size()) +
                      " entries but the element has " + std::to_string(ne) + " edges");
  }
  return edge_tau;
}

// Trace coefficients of the boundary data on every boundary edge: the modal
// projection of g scaled by the adjacent element's orientation sign, so that
// the stored coefficients expand uhat in the global edge orientation.
std::vector<Eigen::VectorXcd> boundary_trace_coeffs(const Mesh& mesh, int k,
                                                    const ScalarField& g) {
  const int quad_degree = std::max(2 * k + 2, 20);
  std::vector<Eigen::VectorXcd> out(mesh.edges.size());
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (!mesh.edges[e].boundary) continue;
    const int elem = mesh.edges[e].element[0];
    const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(elem)];
    int local = -1;
    for (int j = 0; j < el.num_vertices; ++j) {
      if (el.edge[static_cast<std::size_t>(j)] == static_cast<int>(e)) local = j;
    }
    if (local < 0) throw InternalError("boundary edge not found in its adjacent element");
    const EdgeGeometry geom =
        mesh.geometry(elem).edge[static_cast<std::size_t>(local)];
    out[e] = static_cast<double>(geom.orientation) * project_edge(geom, k, g, quad_degree);
  }
  return out;
}

Eigen::VectorXcd gather_element_traces(const Mesh& mesh, int elem,
                                       const std::vector<Eigen::VectorXcd>& uhat, int md) {
  const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(elem)];
  Eigen::VectorXcd out(el.num_vertices * md);
  for (int j = 0; j < el.num_vertices; ++j) {
    out.segment(j * md, md) = uhat[static_cast<std::size_t>(el.edge[static_cast<std::size_t>(j)])];
  }
  return out;
}

std::vector<double> element_edge_tau(const Mesh& mesh, int elem, const ProblemSpec& spec) {
  const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(elem)];
  std::vector<double> taus(static_cast<std::size_t>(el.num_vertices));
  for (int j = 0; j < el.num_vertices; ++j) {
    taus[static_cast<std::size_t>(j)] = spec.edge_tau(el.edge[static_cast<std::size_t>(j)]);
  }
  return taus;
}

void check_global_sizes(const Mesh& mesh, const ProblemSpec& spec) {
  if (!spec.tau_edge.empty() && spec.tau_edge.size() != mesh.edges.size()) {
    throw ConfigError("per-edge stabilization list has " + std::to_string(spec.tau_edge.size()) +
                      " entries but the mesh has " + std::to_string(mesh.edges.size()) + " edges");
  }
}

void check_function_sizes(const Mesh& mesh, const GlobalFunctions& x, const char* name) {
  if (x.q.size() != mesh.elements.size() || x.u.size() != mesh.elements.size() ||
      x.uhat.size() != mesh.edges.size()) {
    throw ConfigError(std::string(name) +
                      " does not match the mesh (need one q/u block per element and one trace "
                      "block per edge)");
  }
}

}  // namespace

void ProblemSpec::validate() const {
  if (!(mu_r > 0.0) || !std::isfinite(mu_r)) {
    throw ConfigError("mu_r must be positive and finite");
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw ConfigError("kappa must be positive and finite");
  }
  if (!std::isfinite(eps_r.real()) || !std::isfinite(eps_r.imag()) || std::abs(eps_r) == 0.0) {
    throw ConfigError("eps_r must be finite and nonzero");
  }
  if (eps_r.imag() < 0.0) {
    throw ConfigError("eps_r must have a nonnegative imaginary part (absorbing media)");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("stabilization tau must be positive and finite");
  }
  for (double t : tau_edge) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw ConfigError("every per-edge stabilization value must be positive and finite");
    }
  }
  if (!f) throw ConfigError("volume source f is not set (use a zero lambda if homogeneous)");
  if (!g) throw ConfigError("boundary data g is not set (use a zero lambda if homogeneous)");
}

LocalOperator assemble_local(const SpaceFamily& fam, const ProblemSpec& spec,
                             const std::vector<double>& edge_tau) {
  const ElementGeometry& el = fam.element;
  const std::vector<double> taus = resolve_edge_tau(fam, spec, edge_tau);

  const int nv = fam.V.dim();
  const int nw = fam.W.dim();
  const int md = fam.edge_degree + 1;
  const int ne = fam.num_edges();
  const int nm = ne * md;
  const int ni = nv + nw;

  LocalOperator op;
  op.n_v = nv;
  op.n_w = nw;
  op.n_m = nm;

  const RulePoints vol = unpack(element_rule(el, fam.quad_bilinear));
  const Eigen::MatrixXd vvals = eval_scalar(fam.V, vol.pts);
  const auto [wx, wy] = eval_vector(fam.W, vol.pts);
  const auto [cx, cy] = eval_curl_scalar(fam.V, vol.pts);

  // mass_v[r,i] = (phi_i, phi_r); mass_w likewise; qcurl[r,j] = (psi_j, curl phi_r).
  const Eigen::MatrixXd mass_v = vvals * vol.w.asDiagonal() * vvals.transpose();
  const Eigen::MatrixXd mass_w =
      wx * vol.w.asDiagonal() * wx.transpose() + wy * vol.w.asDiagonal() * wy.transpose();
  const Eigen::MatrixXd qcurl =
      cx * vol.w.asDiagonal() * wx.transpose() + cy * vol.w.asDiagonal() * wy.transpose();

  Eigen::MatrixXd r_ii = Eigen::MatrixXd::Zero(ni, ni);
  r_ii.topLeftCorner(nv, nv) = spec.mu_r * mass_v;
  r_ii.topRightCorner(nv, nw) = -qcurl;
  r_ii.bottomLeftCorner(nw, nv) = qcurl.transpose();

  Eigen::MatrixXd r_il = Eigen::MatrixXd::Zero(ni, nm);
  Eigen::MatrixXd r_li = Eigen::MatrixXd::Zero(nm, ni);
  Eigen::MatrixXd r_ll = Eigen::MatrixXd::Zero(nm, nm);

  for (int f = 0; f < ne; ++f) {
    const EdgeGeometry& edge = el.edge[static_cast<std::size_t>(f)];
    const double sigma = static_cast<double>(edge.orientation);
    const double tau_f = taus[static_cast<std::size_t>(f)];
    const RulePoints er = unpack(edge_rule(edge, fam.quad_bilinear));
    const Eigen::MatrixXd modes = edge_basis_values(edge, fam.edge_degree, er.pts);
    const Eigen::MatrixXd vv = eval_scalar(fam.V, er.pts);
    const Eigen::MatrixXd tw = ccw_tangential_values(fam.W, edge, er.pts);

    // moments_v[m,r] = <phi_r, L_m>_F ; moments_w[m,j] = <t.psi_j, L_m>_F.
    const Eigen::MatrixXd moments_v = modes * er.w.asDiagonal() * vv.transpose();
    const Eigen::MatrixXd moments_w = modes * er.w.asDiagonal() * tw.transpose();

    r_ii.bottomRightCorner(nw, nw) += tau_f * (tw * er.w.asDiagonal() * tw.transpose());

    r_il.block(0, f * md, nv, md) = -sigma * moments_v.transpose();
    r_il.block(nv, f * md, nw, md) = -tau_f * sigma * moments_w.transpose();

    r_li.block(f * md, 0, md, nv) = sigma * moments_v;
    r_li.block(f * md, nv, md, nw) = -tau_f * sigma * moments_w;

    r_ll.block(f * md, f * md, md, md) =
        tau_f * (modes * er.w.asDiagonal() * modes.transpose());
  }

  op.a_ii = r_ii.cast<Complex>();
  const Complex kk = Complex(spec.kappa * spec.kappa, 0.0) * spec.eps_r;
  op.a_ii.bottomRightCorner(nw, nw) -= kk * mass_w.cast<Complex>();
  op.a_il = r_il.cast<Complex>();
  op.a_li = r_li.cast<Complex>();
  op.a_ll = r_ll.cast<Complex>();

  op.b_i = Eigen::VectorXcd::Zero(ni);
  if (spec.f) {
    Eigen::VectorXcd fx(vol.w.size());
    Eigen::VectorXcd fy(vol.w.size());
    for (Eigen::Index p = 0; p < vol.w.size(); ++p) {
      const Eigen::Vector2cd fp = spec.f(vol.pts[static_cast<std::size_t>(p)]);
      fx[p] = fp[0];
      fy[p] = fp[1];
    }
    for (int i = 0; i < nw; ++i) {
      Complex acc(0.0, 0.0);
      for (Eigen::Index p = 0; p < vol.w.size(); ++p) {
        acc += vol.w[p] * (fx[p] * wx(i, p) + fy[p] * wy(i, p));
      }
      op.b_i[nv + i] = acc;
    }
  }
  return op;
}

CondensedLocal condense(const LocalOperator& op, int element_id) {
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(op.a_ii);
  const Eigen::VectorXcd diag = lu.matrixLU().diagonal();
  const double min_pivot = diag.cwiseAbs().minCoeff();
  const double block_norm = op.a_ii.norm();
  if (!(min_pivot > 1e-12 * block_norm)) {
    std::ostringstream msg;
    msg << "local resonance: the interior (q,u) block of element " << element_id
        << " is numerically singular (min pivot " << min_pivot << ", block norm " << block_norm
        << "); kappa^2*eps_r sits on a local eigenvalue -- refine the mesh or perturb kappa";
    throw ResonanceError(msg.str());
  }
  CondensedLocal out;
  out.n_v = op.n_v;
  out.n_w = op.n_w;
  out.recover_mat = lu.solve(op.a_il);
  out.recover_vec = lu.solve(op.b_i);
  out.schur = op.a_ll - op.a_li * out.recover_mat;
  out.load = -op.a_li * out.recover_vec;
  out.a_li = op.a_li;
  out.a_ll = op.a_ll;
  return out;
}

CondensedSystem assemble_global(const Mesh& mesh, const std::string& tag, int k,
                                const ProblemSpec& spec, ExecPolicy exec) {
  spec.validate();
  check_global_sizes(mesh, spec);

  CondensedSystem sys;
  sys.mesh = &mesh;
  sys.tag = tag;
  sys.degree = k;
  sys.modes_per_edge = k + 1;
  sys.spec = spec;

  const int md = sys.modes_per_edge;
  sys.edge_offset.assign(mesh.edges.size(), -1);
  int ndof = 0;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (!mesh.edges[e].boundary) {
      sys.edge_offset[e] = ndof;
      ndof += md;
    }
  }
  sys.boundary_coeffs = boundary_trace_coeffs(mesh, k, spec.g);

  const int nelem = static_cast<int>(mesh.elements.size());
  sys.local.resize(static_cast<std::size_t>(nelem));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nelem));

  const bool parallel = (exec == ExecPolicy::parallel);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < nelem; ++i) {
    try {
      const ElementGeometry geom = mesh.geometry(i);
      const SpaceFamily fam = build_family(tag, k, geom);
      const LocalOperator op = assemble_local(fam, spec, element_edge_tau(mesh, i, spec));
      sys.local[static_cast<std::size_t>(i)] = condense(op, i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  // Serial accumulation in fixed element order keeps the result independent
  // of the thread count used above.
  sys.rhs = Eigen::VectorXcd::Zero(ndof);
  std::vector<Eigen::Triplet<Complex>> triplets;
  for (int i = 0; i < nelem; ++i) {
    const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(i)];
    const CondensedLocal& loc = sys.local[static_cast<std::size_t>(i)];
    const int ne = el.num_vertices;
    for (int jr = 0; jr < ne; ++jr) {
      const int ge_r = el.edge[static_cast<std::size_t>(jr)];
      const int base_r = sys.edge_offset[static_cast<std::size_t>(ge_r)];
      if (base_r < 0) continue;  // no equations on boundary edges
      for (int mr = 0; mr < md; ++mr) {
        const int row = base_r + mr;
        sys.rhs[row] += loc.load[jr * md + mr];
        for (int jc = 0; jc < ne; ++jc) {
          const int ge_c = el.edge[static_cast<std::size_t>(jc)];
          const int base_c = sys.edge_offset[static_cast<std::size_t>(ge_c)];
          for (int mc = 0; mc < md; ++mc) {
            const Complex val = loc.schur(jr * md + mr, jc * md + mc);
            if (base_c >= 0) {
              triplets.emplace_back(row, base_c + mc, val);
            } else {
              sys.rhs[row] -= val * sys.boundary_coeffs[static_cast<std::size_t>(ge_c)][mc];
            }
          }
        }
      }
    }
  }
  sys.matrix.resize(ndof, ndof);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

DiscreteSolution solve(const CondensedSystem& sys) {
  if (sys.mesh == nullptr) throw ConfigError("condensed system has no mesh attached");
  const Mesh& mesh = *sys.mesh;
  const int md = sys.modes_per_edge;
  const Eigen::Index ndof = sys.rhs.size();

  Eigen::VectorXcd lambda = Eigen::VectorXcd::Zero(ndof);
  double solve_residual = 0.0;
  if (ndof > 0) {
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
    lu.compute(sys.matrix);
    if (lu.info() != Eigen::Success) {
      throw ResonanceError(
          "global resonance: the condensed trace system is numerically singular; "
          "kappa^2*eps_r sits near a discrete eigenvalue -- refine the mesh or perturb kappa");
    }
    lambda = lu.solve(sys.rhs);
    if (lu.info() != Eigen::Success) {
      throw ResonanceError("global resonance: the condensed trace solve failed");
    }
    solve_residual = (sys.matrix * lambda - sys.rhs).norm() / (1.0 + sys.rhs.norm());
    if (!(solve_residual <= 1e-10)) {
      std::ostringstream msg;
      msg << "global resonance: condensed solve left relative residual " << solve_residual
          << " (> 1e-10); the trace system is too ill-conditioned to trust";
      throw ResonanceError(msg.str());
    }
  }

  DiscreteSolution sol;
  sol.solve_residual = solve_residual;
  sol.fields.uhat.resize(mesh.edges.size());
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const int base = sys.edge_offset[e];
    if (base >= 0) {
      sol.fields.uhat[e] = lambda.segment(base, md);
    } else {
      sol.fields.uhat[e] = sys.boundary_coeffs[e];
    }
  }

  const int nelem = static_cast<int>(mesh.elements.size());
  sol.fields.q.resize(static_cast<std::size_t>(nelem));
  sol.fields.u.resize(static_cast<std::size_t>(nelem));
  Eigen::VectorXcd flux = Eigen::VectorXcd::Zero(ndof);
  double denom_sq = 0.0;
  for (int i = 0; i < nelem; ++i) {
    const CondensedLocal& loc = sys.local[static_cast<std::size_t>(i)];
    const Eigen::VectorXcd traces = gather_element_traces(mesh, i, sol.fields.uhat, md);
    const Eigen::VectorXcd interior = loc.recover_vec - loc.recover_mat * traces;
    sol.fields.q[static_cast<std::size_t>(i)] = interior.head(loc.n_v);
    sol.fields.u[static_cast<std::size_t>(i)] = interior.segment(loc.n_v, loc.n_w);

    // Independent flux-continuity check: the trace rows re-evaluated through
    // the recovered interior unknowns must cancel across interior edges.
    const Eigen::VectorXcd contrib = loc.a_li * interior + loc.a_ll * traces;
    const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(i)];
    for (int j = 0; j < el.num_vertices; ++j) {
      const int base = sys.edge_offset[static_cast<std::size_t>(el.edge[static_cast<std::size_t>(j)])];
      if (base < 0) continue;
      flux.segment(base, md) += contrib.segment(j * md, md);
      denom_sq += contrib.segment(j * md, md).squaredNorm();
    }
  }
  sol.flux_residual = (denom_sq > 0.0) ? flux.norm() / std::sqrt(denom_sq) : flux.norm();
  return sol;
}

DiscreteSolution solve_monolithic(const Mesh& mesh, const std::string& tag, int k,
                                  const ProblemSpec& spec) {
  spec.validate();
  check_global_sizes(mesh, spec);
  const int md = k + 1;
  const int nelem = static_cast<int>(mesh.elements.size());

  std::vector<LocalOperator> ops(static_cast<std::size_t>(nelem));
  std::vector<int> interior_offset(static_cast<std::size_t>(nelem), 0);
  int n_interior = 0;
  for (int i = 0; i < nelem; ++i) {
    const SpaceFamily fam = build_family(tag, k, mesh.geometry(i));
    ops[static_cast<std::size_t>(i)] = assemble_local(fam, spec, element_edge_tau(mesh, i, spec));
    interior_offset[static_cast<std::size_t>(i)] = n_interior;
    n_interior += ops[static_cast<std::size_t>(i)].n_v + ops[static_cast<std::size_t>(i)].n_w;
  }

  std::vector<int> edge_offset(mesh.edges.size(), -1);
  int n_trace = 0;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (!mesh.edges[e].boundary) {
      edge_offset[e] = n_interior + n_trace;
      n_trace += md;
    }
  }
  const std::vector<Eigen::VectorXcd> bc = boundary_trace_coeffs(mesh, k, spec.g);

  const int n = n_interior + n_trace;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n);

  for (int i = 0; i < nelem; ++i) {
    const LocalOperator& op = ops[static_cast<std::size_t>(i)];
    const Mesh::Element& el = mesh.elements[static_cast<std::size_t>(i)];
    const int ofs = interior_offset[static_cast<std::size_t>(i)];
    const int ni = op.n_v + op.n_w;
    a.block(ofs, ofs, ni, ni) += op.a_ii;
    b.segment(ofs, ni) += op.b_i;
    for (int j = 0; j < el.num_vertices; ++j) {
      const int ge = el.edge[static_cast<std::size_t>(j)];
      const int col = edge_offset[static_cast<std::size_t>(ge)];
      if (col >= 0) {
        a.block(ofs, col, ni, md) += op.a_il.middleCols(j * md, md);
        a.block(col, ofs, md, ni) += op.a_li.middleRows(j * md, md);
      } else {
        b.segment(ofs, ni) -=
            op.a_il.middleCols(j * md, md) * bc[static_cast<std::size_t>(ge)];
      }
      for (int j2 = 0; j2 < el.num_vertices; ++j2) {
        const int ge2 = el.edge[static_cast<std::size_t>(j2)];
        const int col2 = edge_offset[static_cast<std::size_t>(ge2)];
        const Eigen::MatrixXcd block = op.a_ll.block(j * md, j2 * md, md, md);
        if (col >= 0 && col2 >= 0) {
          a.block(col, col2, md, md) += block;
        } else if (col >= 0) {
          b.segment(col, md) -= block * bc[static_cast<std::size_t>(ge2)];
        }
        // Rows on boundary edges carry no equations (tests vanish there).
      }
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
  if (!lu.isInvertible()) {
    throw ResonanceError(
        "global resonance: the monolithic system is numerically singular; "
        "refine the mesh or perturb kappa");
  }
  const Eigen::VectorXcd x = lu.solve(b);
  const double residual = (a * x - b).norm() / (1.0 + b.norm());
  if (!(residual <= 1e-10)) {
    std::ostringstream msg;
    msg << "global resonance: monolithic solve left relative residual " << residual;
    throw ResonanceError(msg.str());
  }

  DiscreteSolution sol;
  sol.solve_residual = residual;
  sol.fields.q.resize(static_cast<std::size_t>(nelem));
  sol.fields.u.resize(static_cast<std::size_t>(nelem));
  for (int i = 0; i < nelem; ++i) {
    const LocalOperator& op = ops[static_cast<std::size_t>(i)];
    const int ofs = interior_offset[static_cast<std::size_t>(i)];
    sol.fields.q[static_cast<std::size_t>(i)] = x.segment(ofs, op.n_v);
    sol.fields.u[static_cast<std::size_t>(i)] = x.segment(ofs + op.n_v, op.n_w);
  }
  sol.fields.uhat.resize(mesh.edges.size());
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (edge_offset[e] >= 0) {
      sol.fields.uhat[e] = x.segment(edge_offset[e], md);
    } else {
      sol.fields.uhat[e] = bc[e];
    }
  }
  return sol;
}

Complex apply_b(const Mesh& mesh, const std::string& tag, int k, const ProblemSpec& spec,
                const GlobalFunctions& x, const GlobalFunctions& y) {
  check_global_sizes(mesh, spec);
  check_function_sizes(mesh, x, "first argument");
  check_function_sizes(mesh, y, "second argument");

  Complex total(0.0, 0.0);
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const Mesh::Element& el = mesh.elements[i];

    const RulePoints vol = unpack(element_rule(geom, fam.quad_bilinear));
    const Eigen::MatrixXd vvals = eval_scalar(fam.V, vol.pts);
    const auto [wxv, wyv] = eval_vector(fam.W, vol.pts);
    const auto [cxv, cyv] = eval_curl_scalar(fam.V, vol.pts);

    const Eigen::VectorXcd qx = combine(vvals, x.q[i]);
    const Eigen::VectorXcd rx = combine(vvals, y.q[i]);
    const Eigen::VectorXcd ux1 = combine(wxv, x.u[i]);
    const Eigen::VectorXcd ux2 = combine(wyv, x.u[i]);
    const Eigen::VectorXcd vx1 = combine(wxv, y.u[i]);
    const Eigen::VectorXcd vx2 = combine(wyv, y.u[i]);
    const Eigen::VectorXcd curl_q1 = combine(cxv, x.q[i]);
    const Eigen::VectorXcd curl_q2 = combine(cyv, x.q[i]);
    const Eigen::VectorXcd curl_r1 = combine(cxv, y.q[i]);
    const Eigen::VectorXcd curl_r2 = combine(cyv, y.q[i]);

    const Eigen::ArrayXd w = vol.w.array();
    // (mu q, r) - (u, curl r) + (curl q, v)
    total += spec.mu_r * (qx.array() * rx.array().conjugate() * w).sum();
    total -= ((ux1.array() * curl_r1.array().conjugate() +
               ux2.array() * curl_r2.array().conjugate()) *
              w)
                 .sum();
    total += ((curl_q1.array() * vx1.array().conjugate() +
               curl_q2.array() * vx2.array().conjugate()) *
              w)
                 .sum();

    for (int j = 0; j < el.num_vertices; ++j) {
      const EdgeGeometry& edge = geom.edge[static_cast<std::size_t>(j)];
      const double sigma = static_cast<double>(edge.orientation);
      const double tau_f = spec.edge_tau(el.edge[static_cast<std::size_t>(j)]);
      const RulePoints er = unpack(edge_rule(edge, fam.quad_bilinear));
      const Eigen::MatrixXd modes = edge_basis_values(edge, fam.edge_degree, er.pts);
      const Eigen::MatrixXd vv = eval_scalar(fam.V, er.pts);
      const Eigen::MatrixXd tv = ccw_tangential_values(fam.W, edge, er.pts);
      const std::size_t ge = static_cast<std::size_t>(el.edge[static_cast<std::size_t>(j)]);

      const Eigen::VectorXcd q_e = combine(vv, x.q[i]);
      const Eigen::VectorXcd r_e = combine(vv, y.q[i]);
      const Eigen::VectorXcd tu = combine(tv, x.u[i]);
      const Eigen::VectorXcd tvv = combine(tv, y.u[i]);
      const Eigen::VectorXcd mhat = combine(modes, x.uhat[ge]);  // uhat along global tangent
      const Eigen::VectorXcd nhat = combine(modes, y.uhat[ge]);

      const Eigen::ArrayXd ew = er.w.array();
      // -<n x uhat, r> with n x uhat = sigma * mhat
      total -= sigma * (mhat.array() * r_e.array().conjugate() * ew).sum();
      // +<q, n x vhat> with n x vhat = sigma * nhat
      total += sigma * (q_e.array() * nhat.array().conjugate() * ew).sum();
      // + tau <n x (u - uhat), n x (v - vhat)>, n x u = t_ccw . u
      const Eigen::ArrayXcd jump_x = tu.array() - sigma * mhat.array();
      const Eigen::ArrayXcd jump_y = tvv.array() - sigma * nhat.array();
      total += tau_f * (jump_x * jump_y.conjugate() * ew).sum();
    }
  }
  return total;
}

Complex apply_b_exact(const Mesh& mesh, const std::string& tag, int k, const ProblemSpec& spec,
                      const ScalarField& q, const VectorField& curl_q, const VectorField& u,
                      const GlobalFunctions& test, int quad_degree) {
  check_global_sizes(mesh, spec);
  check_function_sizes(mesh, test, "test argument");
  if (!q || !curl_q || !u) throw ConfigError("apply_b_exact needs q, curl q, and u fields");

  Complex total(0.0, 0.0);
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const Mesh::Element& el = mesh.elements[i];
    const int degree = std::max(quad_degree, fam.quad_bilinear);

    const RulePoints vol = unpack(element_rule(geom, degree));
    const Eigen::MatrixXd vvals = eval_scalar(fam.V, vol.pts);
    const auto [wxv, wyv] = eval_vector(fam.W, vol.pts);
    const auto [cxv, cyv] = eval_curl_scalar(fam.V, vol.pts);

    const Eigen::VectorXcd rx = combine(vvals, test.q[i]);
    const Eigen::VectorXcd vx1 = combine(wxv, test.u[i]);
    const Eigen::VectorXcd vx2 = combine(wyv, test.u[i]);
    const Eigen::VectorXcd curl_r1 = combine(cxv, test.q[i]);
    const Eigen::VectorXcd curl_r2 = combine(cyv, test.q[i]);

    for (Eigen::Index p = 0; p < vol.w.size(); ++p) {
      const Vec2 pt = vol.pts[static_cast<std::size_t>(p)];
      const Complex qp = q(pt);
      const Eigen::Vector2cd up = u(pt);
      const Eigen::Vector2cd cq = curl_q(pt);
      total += vol.w[p] * (spec.mu_r * qp * std::conj(rx[p]) -
                           (up[0] * std::conj(curl_r1[p]) + up[1] * std::conj(curl_r2[p])) +
                           (cq[0] * std::conj(vx1[p]) + cq[1] * std::conj(vx2[p])));
    }

    // The first argument's trace is the tangential trace of u itself, so the
    // stabilization term vanishes; only -<n x uhat, r> and <q, n x vhat> remain.
    for (int j = 0; j < el.num_vertices; ++j) {
      const EdgeGeometry& edge = geom.edge[static_cast<std::size_t>(j)];
      const double sigma = static_cast<double>(edge.orientation);
      const Vec2 t_ccw = sigma * edge.tangent;
      const RulePoints er = unpack(edge_rule(edge, degree));
      const Eigen::MatrixXd modes = edge_basis_values(edge, fam.edge_degree, er.pts);
      const Eigen::MatrixXd vv = eval_scalar(fam.V, er.pts);
      const std::size_t ge = static_cast<std::size_t>(el.edge[static_cast<std::size_t>(j)]);

      const Eigen::VectorXcd r_e = combine(vv, test.q[i]);
      const Eigen::VectorXcd nhat = combine(modes, test.uhat[ge]);

      for (Eigen::Index p = 0; p < er.w.size(); ++p) {
        const Vec2 pt = er.pts[static_cast<std::size_t>(p)];
        const Eigen::Vector2cd up = u(pt);
        const Complex tangential_u = t_ccw.x * up[0] + t_ccw.y * up[1];  // = n x u
        const Complex qp = q(pt);
        total += er.w[p] *
                 (-tangential_u * std::conj(r_e[p]) + sigma * qp * std::conj(nhat[p]));
      }
    }
  }
  return total;
}

Complex load_functional(const Mesh& mesh, const std::string& tag, int k, const VectorField& f,
                        const GlobalFunctions& test, int quad_degree) {
  check_function_sizes(mesh, test, "test argument");
  if (!f) throw ConfigError("load_functional needs a volume source field");
  Complex total(0.0, 0.0);
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const int degree = std::max(quad_degree, fam.quad_bilinear);
    const RulePoints vol = unpack(element_rule(geom, degree));
    const auto [wxv, wyv] = eval_vector(fam.W, vol.pts);
    const Eigen::VectorXcd vx1 = combine(wxv, test.u[i]);
    const Eigen::VectorXcd vx2 = combine(wyv, test.u[i]);
    for (Eigen::Index p = 0; p < vol.w.size(); ++p) {
      const Eigen::Vector2cd fp = f(vol.pts[static_cast<std::size_t>(p)]);
      total += vol.w[p] * (fp[0] * std::conj(vx1[p]) + fp[1] * std::conj(vx2[p]));
    }
  }
  return total;
}

double stabilization_seminorm_sq(const Mesh& mesh, const std::string& tag, int k,
                                 const ProblemSpec& spec, const GlobalFunctions& x) {
  check_global_sizes(mesh, spec);
  check_function_sizes(mesh, x, "argument");
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const Mesh::Element& el = mesh.elements[i];
    for (int j = 0; j < el.num_vertices; ++j) {
      const EdgeGeometry& edge = geom.edge[static_cast<std::size_t>(j)];
      const double sigma = static_cast<double>(edge.orientation);
      const double tau_f = spec.edge_tau(el.edge[static_cast<std::size_t>(j)]);
      const RulePoints er = unpack(edge_rule(edge, fam.quad_bilinear));
      const Eigen::MatrixXd modes = edge_basis_values(edge, fam.edge_degree, er.pts);
      const Eigen::MatrixXd tv = ccw_tangential_values(fam.W, edge, er.pts);
      const std::size_t ge = static_cast<std::size_t>(el.edge[static_cast<std::size_t>(j)]);
      const Eigen::VectorXcd tu = combine(tv, x.u[i]);
      const Eigen::VectorXcd mhat = combine(modes, x.uhat[ge]);
      const Eigen::ArrayXcd jump = tu.array() - sigma * mhat.array();
      total += tau_f * (jump.abs2() * er.w.array()).sum();
    }
  }
  return total;
}

double l2_norm_sq_scalar(const GlobalFunctions& x) {
  double total = 0.0;
  for (const Eigen::VectorXcd& c : x.q) total += c.squaredNorm();
  return total;
}

double l2_norm_sq_vector(const GlobalFunctions& x) {
  double total = 0.0;
  for (const Eigen::VectorXcd& c : x.u) total += c.squaredNorm();
  return total;
}

}  // namespace maxhdg
