#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "test_util.hpp"

using namespace maxhdg;
using namespace testutil;

namespace {

ProblemSpec make_spec(double kappa, Complex eps, double tau, VectorField f, ScalarField g) {
  ProblemSpec s;
  s.mu_r = 1.0;
  s.eps_r = eps;
  s.kappa = kappa;
  s.tau = tau;
  s.f = std::move(f);
  s.g = std::move(g);
  return s;
}

double rel_of(Complex lhs, Complex rhs) {
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
}

// Value of the discrete vector field at p (element located by containment).
Eigen::Vector2cd eval_u_at(const Mesh& mesh, const std::string& tag, int k,
                           const GlobalFunctions& x, Vec2 p) {
  const int e = locate_element(mesh, p);
  REQUIRE(e >= 0);
  const SpaceFamily fam = build_family(tag, k, mesh.geometry(e));
  const auto [vx, vy] = eval_vector(fam.W, {p});
  const Eigen::VectorXcd& c = x.u[static_cast<std::size_t>(e)];
  return {(vx.transpose().cast<Complex>() * c)(0), (vy.transpose().cast<Complex>() * c)(0)};
}

Complex eval_q_at(const Mesh& mesh, const std::string& tag, int k, const GlobalFunctions& x,
                  Vec2 p) {
  const int e = locate_element(mesh, p);
  REQUIRE(e >= 0);
  const SpaceFamily fam = build_family(tag, k, mesh.geometry(e));
  const Eigen::MatrixXd vals = eval_scalar(fam.V, {p});
  return (vals.transpose().cast<Complex>() * x.q[static_cast<std::size_t>(e)])(0);
}

}  // namespace

TEST_CASE("problem validation rejects out-of-contract data") {
  const ProblemSpec good = make_spec(1.0, Complex(1.0, 0.0), 1.0, synthetic_f(), synthetic_g());
  CHECK_NOTHROW(good.validate());

  auto broken = [&](auto mutate) {
    ProblemSpec s = good;
    mutate(s);
    CHECK_THROWS_AS(s.validate(), ConfigError);
  };
  broken([](ProblemSpec& s) { s.mu_r = 0.0; });
  broken([](ProblemSpec& s) { s.mu_r = -2.0; });
  broken([](ProblemSpec& s) { s.kappa = 0.0; });
  broken([](ProblemSpec& s) { s.eps_r = Complex(0.0, 0.0); });
  broken([](ProblemSpec& s) { s.eps_r = Complex(1.0, -0.1); });
  broken([](ProblemSpec& s) { s.tau = 0.0; });
  broken([](ProblemSpec& s) { s.tau = -1.0; });
  broken([](ProblemSpec& s) { s.tau_edge = {1.0, 0.0, 2.0}; });
  broken([](ProblemSpec& s) { s.f = nullptr; });
  broken([](ProblemSpec& s) { s.g = nullptr; });
}

TEST_CASE("zero data produces the zero solution") {
  const Mesh mesh = tri_mesh_8();
  const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, zero_vector(), zero_scalar());
  const DiscreteSolution sol = solve(assemble_global(mesh, "tri-pk", 1, spec));
  for (const auto& c : sol.fields.q) CHECK(c.norm() < 1e-12);
  for (const auto& c : sol.fields.u) CHECK(c.norm() < 1e-12);
  for (const auto& c : sol.fields.uhat) CHECK(c.norm() < 1e-12);
  CHECK(sol.flux_residual < 1e-12);
}

TEST_CASE("degree-k polynomial solutions are reproduced exactly") {
  struct Setup {
    const char* name;
    Mesh mesh;
    const char* tag;
    ScalarField (*trace)(VectorField);
  };
  auto square_trace = +[](VectorField u) { return nxu_unit_square(std::move(u)); };
  auto halfrect_trace = +[](VectorField u) { return nxu_rect(std::move(u), 0.0, 1.0, 0.0, 0.5); };
  auto strip_trace = +[](VectorField u) { return nxu_strip(std::move(u)); };

  std::vector<Setup> setups;
  setups.push_back({"tri x2", tri_mesh_2(), "tri-pk", square_trace});
  setups.push_back({"tri x8", tri_mesh_8(), "tri-pk", square_trace});
  setups.push_back({"quad x2", quad_mesh_2(), "quad-enriched-1", halfrect_trace});
  setups.push_back({"quad x8", quad_mesh_8(), "quad-enriched-1", halfrect_trace});
  setups.push_back({"para x1", build_parallelogram_mesh(1), "para-enriched-1", strip_trace});
  setups.push_back({"para x4", build_parallelogram_mesh(2), "para-enriched-1", strip_trace});

  for (const Setup& st : setups) {
    for (int k : {1, 2}) {
      CAPTURE(st.name);
      CAPTURE(k);
      const PolySolution ps = make_poly_solution(k, 1.0, Complex(1.0, 0.0));
      const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, ps.f, st.trace(ps.u));
      const DiscreteSolution sol = solve(assemble_global(st.mesh, st.tag, k, spec));
      CHECK(sol.solve_residual < 1e-10);
      CHECK(sol.flux_residual < 1e-9);
      CHECK(l2_error_vector(st.mesh, st.tag, k, sol.fields.u, ps.u) < 1e-10);
      CHECK(l2_error_scalar(st.mesh, st.tag, k, sol.fields.q, ps.q_field) < 1e-10);
      CHECK(curl_error_vector(st.mesh, st.tag, k, sol.fields.u, ps.q_field) < 1e-9);

      // Post-processing must reproduce the same polynomial (it lies in Wstar).
      const PostprocessSummary post = postprocess_all(st.mesh, st.tag, k, sol);
      ExactSolution ex;
      ex.mu_r = 1.0;
      ex.eps_r = Complex(1.0, 0.0);
      ex.kappa = 1.0;
      ex.u = ps.u;
      ex.q = ps.q_field;
      ex.curl_q = ps.curl_q;
      ex.f = ps.f;
      ex.g = spec.g;
      const ErrorNorms err = compute_errors(st.mesh, st.tag, k, sol, post.ustar, ex);
      CHECK(err.u < 1e-10);
      CHECK(err.q < 1e-10);
      CHECK(err.curl_u < 1e-9);
      CHECK(err.ustar < 1e-9);
      CHECK(err.curl_ustar < 1e-9);
    }
  }
}

TEST_CASE("condensed and monolithic paths agree") {
  const VectorField f = synthetic_f();
  const ScalarField g = synthetic_g();
  struct TagCase {
    const char* tag;
    std::vector<int> degrees;
  };
  const std::vector<TagCase> cases = {{"tri-pk", {1, 2}},
                                      {"para-enriched-1", {1, 2}},
                                      {"quad-enriched-1", {1, 2}},
                                      {"para-enriched-2", {1}},
                                      {"quad-enriched-2", {1}}};
  for (const TagCase& tc : cases) {
    const CellShape shape = family_shape(tc.tag);
    for (const Mesh& mesh : meshes_for_shape(shape)) {
      for (int k : tc.degrees) {
        CAPTURE(tc.tag);
        CAPTURE(k);
        CAPTURE(mesh.elements.size());
        const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.2), 1.0, f, g);
        const DiscreteSolution a = solve(assemble_global(mesh, tc.tag, k, spec));
        const DiscreteSolution b = solve_monolithic(mesh, tc.tag, k, spec);
        CHECK(rel_diff(a.fields, b.fields) < 1e-10);
      }
    }
  }
}

TEST_CASE("the form is adjoint-symmetric under the sign flip of the vector parts") {
  struct FamCase {
    Mesh mesh;
    const char* tag;
  };
  const std::vector<FamCase> cases = {
      {tri_mesh_8(), "tri-pk"}, {para_mesh_8(), "para-enriched-1"}, {quad_mesh_8(), "quad-enriched-1"}};
  auto eng = make_rng(11);
  for (const FamCase& fc : cases) {
    for (int k : {1, 2}) {
      CAPTURE(fc.tag);
      CAPTURE(k);
      ProblemSpec spec = make_spec(2.3, Complex(1.0, 0.0), 0.9, zero_vector(), zero_scalar());
      spec.mu_r = 1.7;
      const int reps = (k == 1) ? 8 : 3;
      for (int r = 0; r < reps; ++r) {
        const GlobalFunctions x = random_global(fc.mesh, fc.tag, k, eng, false);
        const GlobalFunctions y = random_global(fc.mesh, fc.tag, k, eng, false);
        const Complex lhs = apply_b(fc.mesh, fc.tag, k, spec, x, negate_uv(y));
        const Complex rhs = std::conj(apply_b(fc.mesh, fc.tag, k, spec, y, negate_uv(x)));
        CHECK(rel_of(lhs, rhs) < 1e-12);
      }
    }
  }
}

TEST_CASE("energy identity: real part of the form against the split test triple") {
  struct FamCase {
    Mesh mesh;
    const char* tag;
  };
  const std::vector<FamCase> cases = {
      {tri_mesh_8(), "tri-pk"}, {para_mesh_8(), "para-enriched-1"}, {quad_mesh_8(), "quad-enriched-1"}};
  auto eng = make_rng(22);
  for (const FamCase& fc : cases) {
    for (int k : {1, 2}) {
      CAPTURE(fc.tag);
      CAPTURE(k);
      ProblemSpec spec = make_spec(1.4, Complex(1.0, 0.0), 2.5, zero_vector(), zero_scalar());
      spec.mu_r = 0.8;
      const int reps = (k == 1) ? 8 : 3;
      for (int r = 0; r < reps; ++r) {
        const GlobalFunctions x = random_global(fc.mesh, fc.tag, k, eng, false);
        const Complex lhs = std::conj(apply_b(fc.mesh, fc.tag, k, spec, x, only_q(x))) +
                            apply_b(fc.mesh, fc.tag, k, spec, x, only_uv(x));
        const double rhs = spec.mu_r * l2_norm_sq_scalar(x) +
                           stabilization_seminorm_sq(fc.mesh, fc.tag, k, spec, x);
        CHECK(rel_of(lhs, Complex(rhs, 0.0)) < 1e-12);
      }
    }
  }
}

TEST_CASE("energy identity holds with per-edge stabilization overrides") {
  const Mesh mesh = tri_mesh_8();
  ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, zero_vector(), zero_scalar());
  spec.tau_edge.resize(mesh.edges.size());
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    spec.tau_edge[e] = 0.5 + 0.13 * static_cast<double>(e);
  }
  auto eng = make_rng(33);
  for (int r = 0; r < 5; ++r) {
    const GlobalFunctions x = random_global(mesh, "tri-pk", 1, eng, false);
    const Complex lhs = std::conj(apply_b(mesh, "tri-pk", 1, spec, x, only_q(x))) +
                        apply_b(mesh, "tri-pk", 1, spec, x, only_uv(x));
    const double rhs =
        l2_norm_sq_scalar(x) + stabilization_seminorm_sq(mesh, "tri-pk", 1, spec, x);
    CHECK(rel_of(lhs, Complex(rhs, 0.0)) < 1e-12);
  }
}

TEST_CASE("the form is linear in the first slot and conjugate-linear in the second") {
  const Mesh mesh = tri_mesh_2();
  const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.3, zero_vector(), zero_scalar());
  auto eng = make_rng(44);
  const GlobalFunctions x = random_global(mesh, "tri-pk", 1, eng, false);
  const GlobalFunctions y = random_global(mesh, "tri-pk", 1, eng, false);
  const Complex alpha(0.7, -1.9);

  GlobalFunctions ax = x;
  for (auto& c : ax.q) c *= alpha;
  for (auto& c : ax.u) c *= alpha;
  for (auto& c : ax.uhat) c *= alpha;
  CHECK(rel_of(apply_b(mesh, "tri-pk", 1, spec, ax, y),
               alpha * apply_b(mesh, "tri-pk", 1, spec, x, y)) < 1e-12);

  GlobalFunctions ay = y;
  for (auto& c : ay.q) c *= alpha;
  for (auto& c : ay.u) c *= alpha;
  for (auto& c : ay.uhat) c *= alpha;
  CHECK(rel_of(apply_b(mesh, "tri-pk", 1, spec, x, ay),
               std::conj(alpha) * apply_b(mesh, "tri-pk", 1, spec, x, y)) < 1e-12);
}

TEST_CASE("consistency: the exact solution satisfies the discrete equations") {
  // Trigonometric exact solution on the unit square (boundary tests zeroed).
  {
    const ExactSolution ex = manufactured_solution();
    const ProblemSpec spec = ex.problem(1.0);
    const Mesh mesh = tri_mesh_8();
    auto eng = make_rng(55);
    const Complex k2e = spec.kappa * spec.kappa * spec.eps_r;
    for (int r = 0; r < 5; ++r) {
      const GlobalFunctions y = random_global(mesh, "tri-pk", 1, eng, true);
      const Complex lhs = apply_b_exact(mesh, "tri-pk", 1, spec, ex.q, ex.curl_q, ex.u, y) -
                          k2e * load_functional(mesh, "tri-pk", 1, ex.u, y);
      const Complex rhs = load_functional(mesh, "tri-pk", 1, ex.f, y);
      CHECK(rel_of(lhs, rhs) < 1e-8);
    }
  }
  // Polynomial exact solution (exact quadrature end to end).
  {
    const PolySolution ps = make_poly_solution(2, 1.0, Complex(1.0, 0.0));
    const ProblemSpec spec =
        make_spec(1.0, Complex(1.0, 0.0), 1.0, ps.f, nxu_rect(ps.u, 0.0, 1.0, 0.0, 0.5));
    const Mesh mesh = quad_mesh_2();
    auto eng = make_rng(66);
    for (int r = 0; r < 5; ++r) {
      const GlobalFunctions y = random_global(mesh, "quad-enriched-1", 2, eng, true);
      const Complex lhs =
          apply_b_exact(mesh, "quad-enriched-1", 2, spec, ps.q_field, ps.curl_q, ps.u, y) -
          Complex(1.0, 0.0) * load_functional(mesh, "quad-enriched-1", 2, ps.u, y);
      const Complex rhs = load_functional(mesh, "quad-enriched-1", 2, ps.f, y);
      CHECK(rel_of(lhs, rhs) < 1e-10);
    }
  }
}

TEST_CASE("the computed solution satisfies the scheme against random tests") {
  const ExactSolution ex = manufactured_solution();
  const ProblemSpec spec = ex.problem(1.0);
  const Mesh mesh = build_triangle_mesh(4);
  const DiscreteSolution sol = solve(assemble_global(mesh, "tri-pk", 1, spec));
  const Complex k2e = spec.kappa * spec.kappa * spec.eps_r;
  auto eng = make_rng(77);
  for (int r = 0; r < 5; ++r) {
    const GlobalFunctions y = random_global(mesh, "tri-pk", 1, eng, true);
    const Complex lhs = apply_b(mesh, "tri-pk", 1, spec, sol.fields, y) -
                        k2e * inner_w(sol.fields, y);
    // quad_degree 0 clamps to the family's bilinear rule, i.e. the identical
    // quadrature the assembly used for (f, v); any higher degree would compare
    // two different discretizations of the non-polynomial source.
    const Complex rhs = load_functional(mesh, "tri-pk", 1, ex.f, y, 0);
    CHECK(rel_of(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("solution is invariant under element reordering") {
  const Mesh mesh = build_triangle_mesh(2);
  // Rebuild the same triangulation with the cell list reversed. Edge ids are
  // endpoint-sorted, hence identical between the two meshes.
  std::vector<std::vector<int>> cells;
  for (auto it = mesh.elements.rbegin(); it != mesh.elements.rend(); ++it) {
    cells.push_back(std::vector<int>(it->vertex.begin(), it->vertex.begin() + it->num_vertices));
  }
  const Mesh reordered = build_mesh_from_cells(mesh.vertices, cells, CellShape::triangle);
  REQUIRE(reordered.edges.size() == mesh.edges.size());

  const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, synthetic_f(), synthetic_g());
  const DiscreteSolution a = solve(assemble_global(mesh, "tri-pk", 1, spec));
  const DiscreteSolution b = solve(assemble_global(reordered, "tri-pk", 1, spec));
  const std::size_t n = mesh.elements.size();
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    CHECK((a.fields.uhat[e] - b.fields.uhat[e]).norm() < 1e-9);
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK((a.fields.q[i] - b.fields.q[n - 1 - i]).norm() < 1e-9);
    CHECK((a.fields.u[i] - b.fields.u[n - 1 - i]).norm() < 1e-9);
  }
}

TEST_CASE("reflecting the data across y = x reflects the solution") {
  const ExactSolution ex = manufactured_solution();
  ExactSolution rex = ex;
  rex.u = [u = ex.u](Vec2 p) -> Eigen::Vector2cd {
    const Eigen::Vector2cd v = u({p.y, p.x});
    return {v[1], v[0]};
  };
  rex.q = [q = ex.q](Vec2 p) -> Complex { return -q({p.y, p.x}); };
  rex.curl_q = [c = ex.curl_q](Vec2 p) -> Eigen::Vector2cd {
    const Eigen::Vector2cd v = c({p.y, p.x});
    return {v[1], v[0]};
  };
  rex.f = [f = ex.f](Vec2 p) -> Eigen::Vector2cd {
    const Eigen::Vector2cd v = f({p.y, p.x});
    return {v[1], v[0]};
  };
  rex.g = nxu_unit_square(rex.u);

  const Mesh mesh = build_triangle_mesh(4);  // symmetric under the swap
  const DiscreteSolution sa = solve(assemble_global(mesh, "tri-pk", 1, ex.problem(1.0)));
  const DiscreteSolution sb = solve(assemble_global(mesh, "tri-pk", 1, rex.problem(1.0)));

  // The triangle quadrature is a collapsed tensor rule anchored at the first
  // vertex, so integrating the non-polynomial source over mirrored elements
  // agrees only up to quadrature error (~1e-6 at this resolution). The check
  // still catches any orientation or sign bug, which would show up at O(1).
  const std::vector<Vec2> pts = {{0.31, 0.17}, {0.52, 0.69}, {0.11, 0.83}, {0.67, 0.41},
                                 {0.935, 0.215}, {0.29, 0.56}};
  for (const Vec2 p : pts) {
    const Vec2 sp{p.y, p.x};
    const Eigen::Vector2cd ub = eval_u_at(mesh, "tri-pk", 1, sb.fields, p);
    const Eigen::Vector2cd ua = eval_u_at(mesh, "tri-pk", 1, sa.fields, sp);
    CHECK(std::abs(ub[0] - ua[1]) < 5e-5);
    CHECK(std::abs(ub[1] - ua[0]) < 5e-5);
    const Complex qb = eval_q_at(mesh, "tri-pk", 1, sb.fields, p);
    const Complex qa = eval_q_at(mesh, "tri-pk", 1, sa.fields, sp);
    CHECK(std::abs(qb + qa) < 5e-5);
  }
}

TEST_CASE("serial and parallel assembly produce identical systems and solutions") {
  const ExactSolution ex = manufactured_solution();
  const ProblemSpec spec = ex.problem(1.0);
  const Mesh mesh = build_triangle_mesh(4);
  const CondensedSystem sys_s = assemble_global(mesh, "tri-pk", 1, spec, ExecPolicy::serial);
  const CondensedSystem sys_p = assemble_global(mesh, "tri-pk", 1, spec, ExecPolicy::parallel);

  const Eigen::MatrixXcd ds(sys_s.matrix);
  const Eigen::MatrixXcd dp(sys_p.matrix);
  CHECK((ds - dp).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sys_s.rhs - sys_p.rhs).cwiseAbs().maxCoeff() == 0.0);

  const DiscreteSolution a = solve(sys_s);
  const DiscreteSolution b = solve(sys_p);
  CHECK(rel_diff(a.fields, b.fields) == 0.0);

  const PostprocessSummary post_s = postprocess_all(mesh, "tri-pk", 1, a, ExecPolicy::serial);
  const PostprocessSummary post_p = postprocess_all(mesh, "tri-pk", 1, b, ExecPolicy::parallel);
  for (std::size_t i = 0; i < post_s.ustar.size(); ++i) {
    CHECK((post_s.ustar[i] - post_p.ustar[i]).norm() == 0.0);
  }
}

TEST_CASE("condensed system couples interior trace modes only") {
  const Mesh mesh = tri_mesh_8();
  const ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, synthetic_f(), synthetic_g());
  const CondensedSystem sys = assemble_global(mesh, "tri-pk", 1, spec);
  CHECK(sys.modes_per_edge == 2);
  CHECK(sys.rhs.size() == 2 * mesh.num_interior_edges());
  CHECK(sys.matrix.rows() == sys.rhs.size());
  int interior_offsets = 0;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (mesh.edges[e].boundary) {
      CHECK(sys.edge_offset[e] == -1);
      CHECK(sys.boundary_coeffs[e].size() == 2);
    } else {
      CHECK(sys.edge_offset[e] >= 0);
      ++interior_offsets;
    }
  }
  CHECK(interior_offsets == mesh.num_interior_edges());
}

TEST_CASE("a singular interior block is reported as a resonance") {
  LocalOperator op;
  op.n_v = 1;
  op.n_w = 1;
  op.n_m = 2;
  op.a_ii = Eigen::MatrixXcd::Zero(2, 2);
  op.a_il = Eigen::MatrixXcd::Zero(2, 2);
  op.a_li = Eigen::MatrixXcd::Zero(2, 2);
  op.a_ll = Eigen::MatrixXcd::Zero(2, 2);
  op.b_i = Eigen::VectorXcd::Zero(2);
  CHECK_THROWS_AS(condense(op, 7), ResonanceError);
}

TEST_CASE("mismatched per-edge stabilization list is rejected at assembly") {
  const Mesh mesh = tri_mesh_2();
  ProblemSpec spec = make_spec(1.0, Complex(1.0, 0.0), 1.0, synthetic_f(), synthetic_g());
  spec.tau_edge = {1.0, 2.0};  // mesh has 5 edges
  CHECK_THROWS_AS(assemble_global(mesh, "tri-pk", 1, spec), ConfigError);
}
