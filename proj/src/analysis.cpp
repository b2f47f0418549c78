#include "maxhdg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <vector>

#include "maxhdg/errors.hpp"
#include "maxhdg/quadrature.hpp"

namespace maxhdg {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXcd combine(const Eigen::MatrixXd& basis_vals, const Eigen::VectorXcd& coef) {
  Eigen::VectorXcd out(basis_vals.cols());
  out.real() = basis_vals.transpose() * coef.real();
  out.imag() = basis_vals.transpose() * coef.imag();
  return out;
}

struct RulePoints {
  std::vector<Vec2> pts;
  Eigen::VectorXd w;
};

RulePoints unpack(const QuadRule& rule) {
  RulePoints out;
  out.pts.resize(rule.points.size());
  out.w.resize(static_cast<Eigen::Index>(rule.points.size()));
  for (std::size_t i = 0; i < rule.points.size(); ++i) {
    out.pts[i] = rule.points[i].p;
    out.w[static_cast<Eigen::Index>(i)] = rule.points[i].w;
  }
  return out;
}

Mesh build_domain_mesh(const std::string& tag, int n) {
  switch (family_shape(tag)) {
    case CellShape::triangle:
      return build_triangle_mesh(n);
    case CellShape::parallelogram:
      return build_parallelogram_mesh(n);
    case CellShape::square:
      return build_square_mesh(n);
  }
  throw InternalError("unhandled cell shape");
}

// Paper-style scientific format with three significant digits and a minimal
// exponent, e.g. 4.43e-2.
std::string short_sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  std::string s(buf);
  const std::size_t e = s.find('e');
  const int expo = std::stoi(s.substr(e + 1));
  std::snprintf(buf, sizeof(buf), "%se%d", s.substr(0, e).c_str(), expo);
  return std::string(buf);
}

std::string csv_sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return std::string(buf);
}

std::string fixed4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf);
}

std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

std::string trimmed_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return std::string(buf);
}

}  // namespace

ProblemSpec ExactSolution::problem(double tau) const {
  ProblemSpec spec;
  spec.mu_r = mu_r;
  spec.eps_r = eps_r;
  spec.kappa = kappa;
  spec.tau = tau;
  spec.f = f;
  spec.g = g;
  return spec;
}

ExactSolution manufactured_solution() {
  ExactSolution s;
  s.mu_r = 1.0;
  s.eps_r = Complex(1.0, 0.0);
  s.kappa = std::sqrt(10.0);

  s.u = [](Vec2 p) -> Eigen::Vector2cd {
    return {Complex(std::sin(2.0 * kPi * p.x) * std::sin(2.0 * kPi * p.y), 0.0),
            Complex(std::sin(kPi * p.x) * std::sin(kPi * p.y), 0.0)};
  };
  // q = mu_r^-1 curl u = d_x u2 - d_y u1.
  s.q = [](Vec2 p) -> Complex {
    return Complex(kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y) -
                       2.0 * kPi * std::sin(2.0 * kPi * p.x) * std::cos(2.0 * kPi * p.y),
                   0.0);
  };
  // curl q = (d_y q, -d_x q).
  s.curl_q = [](Vec2 p) -> Eigen::Vector2cd {
    const double dyq = kPi * kPi * std::cos(kPi * p.x) * std::cos(kPi * p.y) +
                       4.0 * kPi * kPi * std::sin(2.0 * kPi * p.x) * std::sin(2.0 * kPi * p.y);
    const double dxq = -kPi * kPi * std::sin(kPi * p.x) * std::sin(kPi * p.y) -
                       4.0 * kPi * kPi * std::cos(2.0 * kPi * p.x) * std::cos(2.0 * kPi * p.y);
    return {Complex(dyq, 0.0), Complex(-dxq, 0.0)};
  };
  // f = curl q - kappa^2 eps_r u with kappa^2 eps_r = 10.
  const VectorField u = s.u;
  const VectorField curl_q = s.curl_q;
  s.f = [u, curl_q](Vec2 p) -> Eigen::Vector2cd {
    return curl_q(p) - 10.0 * u(p);
  };
  // g = n x u = (ccw boundary tangent) . u on the two supported domains: the
  // unit square and the sheared strip 0 <= x - sqrt(3) y <= 1, 0 <= y <= 1/2.
  s.g = [u](Vec2 p) -> Complex {
    constexpr double tol = 1e-9;
    const double s3 = std::sqrt(3.0);
    const Eigen::Vector2cd up = u(p);
    if (std::abs(p.x) < tol) return -up[1];
    if (std::abs(p.x - 1.0) < tol) return up[1];
    if (std::abs(p.y) < tol) return up[0];
    if (std::abs(p.y - 1.0) < tol) return -up[0];
    if (std::abs(p.y - 0.5) < tol) return -up[0];
    if (std::abs(p.x - s3 * p.y) < tol) return -0.5 * (s3 * up[0] + up[1]);
    if (std::abs(p.x - s3 * p.y - 1.0) < tol) return 0.5 * (s3 * up[0] + up[1]);
    throw ConfigError("boundary data queried away from a supported domain boundary");
  };
  return s;
}

double l2_error_scalar(const Mesh& mesh, const std::string& tag, int k,
                       const std::vector<Eigen::VectorXcd>& coeffs, const ScalarField& exact,
                       int quad_degree) {
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const RulePoints rule = unpack(element_rule(geom, quad_degree));
    const Eigen::VectorXcd vals = combine(eval_scalar(fam.V, rule.pts), coeffs[i]);
    for (Eigen::Index p = 0; p < rule.w.size(); ++p) {
      total += rule.w[p] * std::norm(vals[p] - exact(rule.pts[static_cast<std::size_t>(p)]));
    }
  }
  return std::sqrt(total);
}

double l2_error_vector(const Mesh& mesh, const std::string& tag, int k,
                       const std::vector<Eigen::VectorXcd>& coeffs, const VectorField& exact,
                       int quad_degree) {
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const RulePoints rule = unpack(element_rule(geom, quad_degree));
    const auto [wx, wy] = eval_vector(fam.W, rule.pts);
    const Eigen::VectorXcd v1 = combine(wx, coeffs[i]);
    const Eigen::VectorXcd v2 = combine(wy, coeffs[i]);
    for (Eigen::Index p = 0; p < rule.w.size(); ++p) {
      const Eigen::Vector2cd e = exact(rule.pts[static_cast<std::size_t>(p)]);
      total += rule.w[p] * (std::norm(v1[p] - e[0]) + std::norm(v2[p] - e[1]));
    }
  }
  return std::sqrt(total);
}

double curl_error_vector(const Mesh& mesh, const std::string& tag, int k,
                         const std::vector<Eigen::VectorXcd>& coeffs,
                         const ScalarField& exact_curl, int quad_degree) {
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const ElementGeometry geom = mesh.geometry(static_cast<int>(i));
    const SpaceFamily fam = build_family(tag, k, geom);
    const RulePoints rule = unpack(element_rule(geom, quad_degree));
    const Eigen::VectorXcd vals = combine(eval_curl_vector(fam.W, rule.pts), coeffs[i]);
    for (Eigen::Index p = 0; p < rule.w.size(); ++p) {
      total += rule.w[p] * std::norm(vals[p] - exact_curl(rule.pts[static_cast<std::size_t>(p)]));
    }
  }
  return std::sqrt(total);
}

PostprocessSummary postprocess_all(const Mesh& mesh, const std::string& tag, int k,
                                   const DiscreteSolution& sol, ExecPolicy exec) {
  const int nelem = static_cast<int>(mesh.elements.size());
  if (sol.fields.q.size() != mesh.elements.size() || sol.fields.u.size() != mesh.elements.size()) {
    throw ConfigError("solution does not match the mesh");
  }
  PostprocessSummary out;
  out.ustar.resize(static_cast<std::size_t>(nelem));
  std::vector<PostprocessedField> fields(static_cast<std::size_t>(nelem));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nelem));

  const bool parallel = (exec == ExecPolicy::parallel);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < nelem; ++i) {
    try {
      const SpaceFamily fam = build_family(tag, k, mesh.geometry(i));
      fields[static_cast<std::size_t>(i)] =
          postprocess_element(fam, sol.fields.q[static_cast<std::size_t>(i)],
                              sol.fields.u[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  for (int i = 0; i < nelem; ++i) {
    PostprocessedField& f = fields[static_cast<std::size_t>(i)];
    out.ustar[static_cast<std::size_t>(i)] = std::move(f.ustar);
    out.max_eta = std::max(out.max_eta, f.eta_norm);
    out.max_gamma = std::max(out.max_gamma, f.gamma_abs);
    out.max_res_curl = std::max(out.max_res_curl, f.res_curl);
    out.max_res_grad = std::max(out.max_res_grad, f.res_grad);
  }
  return out;
}

ErrorNorms compute_errors(const Mesh& mesh, const std::string& tag, int k,
                          const DiscreteSolution& sol,
                          const std::vector<Eigen::VectorXcd>& ustar, const ExactSolution& exact,
                          int quad_degree, ExecPolicy exec) {
  const int nelem = static_cast<int>(mesh.elements.size());
  if (ustar.size() != mesh.elements.size()) {
    throw ConfigError("post-processed coefficients do not match the mesh");
  }
  // Per-element squared contributions, reduced serially for determinism.
  std::vector<std::array<double, 5>> partial(static_cast<std::size_t>(nelem));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nelem));

  const bool parallel = (exec == ExecPolicy::parallel);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < nelem; ++i) {
    try {
      const std::size_t idx = static_cast<std::size_t>(i);
      const ElementGeometry geom = mesh.geometry(i);
      const SpaceFamily fam = build_family(tag, k, geom);
      const RulePoints rule = unpack(element_rule(geom, quad_degree));

      const auto [wx, wy] = eval_vector(fam.W, rule.pts);
      const Eigen::VectorXcd uh1 = combine(wx, sol.fields.u[idx]);
      const Eigen::VectorXcd uh2 = combine(wy, sol.fields.u[idx]);
      const Eigen::VectorXcd curl_uh = combine(eval_curl_vector(fam.W, rule.pts), sol.fields.u[idx]);
      const Eigen::VectorXcd qh = combine(eval_scalar(fam.V, rule.pts), sol.fields.q[idx]);
      const auto [sx, sy] = eval_vector(fam.Wstar, rule.pts);
      const Eigen::VectorXcd us1 = combine(sx, ustar[idx]);
      const Eigen::VectorXcd us2 = combine(sy, ustar[idx]);
      const Eigen::VectorXcd curl_us = combine(eval_curl_vector(fam.Wstar, rule.pts), ustar[idx]);

      std::array<double, 5> acc{0.0, 0.0, 0.0, 0.0, 0.0};
      for (Eigen::Index p = 0; p < rule.w.size(); ++p) {
        const Vec2 pt = rule.pts[static_cast<std::size_t>(p)];
        const Eigen::Vector2cd ue = exact.u(pt);
        const Complex qe = exact.q(pt);
        const Complex curl_ue = exact.mu_r * qe;  // curl u = mu_r q
        const double w = rule.w[p];
        acc[0] += w * (std::norm(uh1[p] - ue[0]) + std::norm(uh2[p] - ue[1]));
        acc[1] += w * std::norm(curl_uh[p] - curl_ue);
        acc[2] += w * std::norm(qh[p] - qe);
        acc[3] += w * (std::norm(us1[p] - ue[0]) + std::norm(us2[p] - ue[1]));
        acc[4] += w * std::norm(curl_us[p] - curl_ue);
      }
      partial[idx] = acc;
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  std::array<double, 5> sum{0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& acc : partial) {
    for (int c = 0; c < 5; ++c) sum[static_cast<std::size_t>(c)] += acc[static_cast<std::size_t>(c)];
  }
  ErrorNorms out;
  out.u = std::sqrt(sum[0]);
  out.curl_u = std::sqrt(sum[1]);
  out.q = std::sqrt(sum[2]);
  out.ustar = std::sqrt(sum[3]);
  out.curl_ustar = std::sqrt(sum[4]);
  return out;
}

std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size()) {
    throw ConfigError("eoc needs matching error/h sequences");
  }
  if (errors.size() < 2) {
    throw ConfigError("eoc needs at least two levels");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> rates(errors.size(), nan);
  for (std::size_t i = 1; i < errors.size(); ++i) {
    if (errors[i - 1] > 0.0 && errors[i] > 0.0 && hs[i - 1] > 0.0 && hs[i] > 0.0 &&
        hs[i - 1] != hs[i]) {
      rates[i] = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
    }
  }
  return rates;
}

ConvergenceReport run_convergence_study(const std::string& tag, int k,
                                        const std::vector<int>& levels,
                                        const StudyOptions& opts) {
  if (!is_family_tag(tag)) throw ConfigError("unknown construction tag: " + tag);
  if (levels.empty()) throw ConfigError("at least one refinement level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw ConfigError("levels must be positive cell counts");
    if (i > 0 && levels[i] <= levels[i - 1]) throw ConfigError("levels must be ascending");
  }
  if (!(opts.tau > 0.0)) throw ConfigError("stabilization tau must be positive");

  const ExactSolution exact = manufactured_solution();
  const ProblemSpec spec = exact.problem(opts.tau);

  ConvergenceReport report;
  report.tag = tag;
  report.degree = k;
  report.tau = opts.tau;
  for (int n : levels) {
    const Mesh mesh = build_domain_mesh(tag, n);
    ConvergenceLevel level;
    level.n = n;
    level.h = mesh.h;
    try {
      const CondensedSystem sys = assemble_global(mesh, tag, k, spec, opts.exec);
      const DiscreteSolution sol = solve(sys);
      const PostprocessSummary pp = postprocess_all(mesh, tag, k, sol, opts.exec);
      level.err = compute_errors(mesh, tag, k, sol, pp.ustar, exact, opts.quad_degree, opts.exec);
    } catch (const ResonanceError&) {
      level.resonant = true;
      report.any_resonance = true;
    }
    report.levels.push_back(level);
  }
  return report;
}

std::string render_report(const ConvergenceReport& report, ReportFormat format) {
  if (report.levels.empty()) throw ConfigError("cannot render an empty report");
  const std::size_t n = report.levels.size();

  // Column extractors in report order.
  const auto col = [](const ErrorNorms& e, int c) -> double {
    switch (c) {
      case 0: return e.u;
      case 1: return e.curl_u;
      case 2: return e.q;
      case 3: return e.ustar;
      default: return e.curl_ustar;
    }
  };
  // rates[c][i]: NaN when unavailable (first row, resonant row, or gap).
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rates(5, std::vector<double>(n, nan));
  for (int c = 0; c < 5; ++c) {
    for (std::size_t i = 1; i < n; ++i) {
      const ConvergenceLevel& prev = report.levels[i - 1];
      const ConvergenceLevel& cur = report.levels[i];
      if (prev.resonant || cur.resonant) continue;
      const double e0 = col(prev.err, c);
      const double e1 = col(cur.err, c);
      if (e0 > 0.0 && e1 > 0.0 && prev.h > 0.0 && cur.h > 0.0 && prev.h != cur.h) {
        rates[static_cast<std::size_t>(c)][i] = std::log(e0 / e1) / std::log(prev.h / cur.h);
      }
    }
  }

  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "level,n,h,err_u,rate_u,err_curl_u,rate_curl_u,err_q,rate_q,"
           "err_ustar,rate_ustar,err_curl_ustar,rate_curl_ustar\n";
    for (std::size_t i = 0; i < n; ++i) {
      const ConvergenceLevel& lv = report.levels[i];
      out << (i + 1) << ',' << lv.n << ',' << csv_sci(lv.h);
      for (int c = 0; c < 5; ++c) {
        const double r = rates[static_cast<std::size_t>(c)][i];
        out << ',' << (lv.resonant ? "" : csv_sci(col(lv.err, c)));
        out << ',' << (std::isnan(r) ? "" : fixed4(r));
      }
      out << '\n';
    }
    return out.str();
  }

  out << "| sqrt(2)/h | \\|u-u_h\\| | rate | \\|curl(u-u_h)\\| | rate | \\|q-q_h\\| | rate "
         "| \\|u-u_h*\\| | rate | \\|curl(u-u_h*)\\| | rate |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < n; ++i) {
    const ConvergenceLevel& lv = report.levels[i];
    out << "| " << trimmed_g(std::sqrt(2.0) / lv.h);
    for (int c = 0; c < 5; ++c) {
      const double r = rates[static_cast<std::size_t>(c)][i];
      out << " | " << (lv.resonant ? "--" : short_sci(col(lv.err, c)));
      out << " | " << (std::isnan(r) ? "--" : fixed2(r));
    }
    out << " |\n";
  }
  for (const ConvergenceLevel& lv : report.levels) {
    if (lv.resonant) {
      out << "\nlevel n=" << lv.n << " skipped: resonance (kappa^2 eps_r too close to a "
                                     "discrete eigenvalue at this resolution)\n";
    }
  }
  return out.str();
}

int locate_element(const Mesh& mesh, Vec2 p) {
  for (std::size_t i = 0; i < mesh.elements.size(); ++i) {
    const Mesh::Element& el = mesh.elements[i];
    bool inside = true;
    for (int j = 0; j < el.num_vertices && inside; ++j) {
      const Vec2 a = mesh.vertices[static_cast<std::size_t>(el.vertex[static_cast<std::size_t>(j)])];
      const Vec2 b = mesh.vertices[static_cast<std::size_t>(
          el.vertex[static_cast<std::size_t>((j + 1) % el.num_vertices)])];
      if (cross(b - a, p - a) < -1e-10 * norm(b - a)) inside = false;
    }
    if (inside) return static_cast<int>(i);
  }
  return -1;
}

std::string sample_fields_csv(const Mesh& mesh, const std::string& tag, int k,
                              const DiscreteSolution& sol,
                              const std::vector<Eigen::VectorXcd>& ustar, int grid) {
  if (grid < 1) throw ConfigError("sample grid resolution must be >= 1");
  if (sol.fields.u.size() != mesh.elements.size() || ustar.size() != mesh.elements.size()) {
    throw ConfigError("solution/post-processed fields do not match the mesh");
  }
  // The two supported domains: the sheared strip has max y = 1/2, the unit
  // square has max y = 1; map a unit-square parameter grid accordingly.
  double maxy = 0.0;
  for (const Vec2& v : mesh.vertices) maxy = std::max(maxy, v.y);
  const bool strip = (maxy < 0.75);
  const double s3 = std::sqrt(3.0);

  std::ostringstream out;
  out << "x,y,u1_h,u2_h,q_h,u1_star,u2_star\n";
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      const double s = (i + 0.5) / grid;
      const double t = (j + 0.5) / grid;
      const Vec2 p = strip ? Vec2{s + s3 * t / 2.0, t / 2.0} : Vec2{s, t};
      const int e = locate_element(mesh, p);
      if (e < 0) throw InternalError("sample point fell outside every element");
      const std::size_t idx = static_cast<std::size_t>(e);
      const SpaceFamily fam = build_family(tag, k, mesh.geometry(e));
      const std::vector<Vec2> pts{p};
      const auto [wx, wy] = eval_vector(fam.W, pts);
      const auto [sx, sy] = eval_vector(fam.Wstar, pts);
      const Complex u1 = combine(wx, sol.fields.u[idx])[0];
      const Complex u2 = combine(wy, sol.fields.u[idx])[0];
      const Complex qh = combine(eval_scalar(fam.V, pts), sol.fields.q[idx])[0];
      const Complex s1 = combine(sx, ustar[idx])[0];
      const Complex s2 = combine(sy, ustar[idx])[0];
      out << csv_sci(p.x) << ',' << csv_sci(p.y) << ',' << csv_sci(u1.real()) << ','
          << csv_sci(u2.real()) << ',' << csv_sci(qh.real()) << ',' << csv_sci(s1.real()) << ','
          << csv_sci(s2.real()) << '\n';
    }
  }
  return out.str();
}

}  // namespace maxhdg
