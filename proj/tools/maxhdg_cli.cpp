// Command-line front end: convergence studies, decomposition certification of
// the local space constructions, single solves, and field sampling.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maxhdg/analysis.hpp"
#include "maxhdg/errors.hpp"
#include "maxhdg/mdecomp.hpp"
#include "maxhdg/mesh.hpp"
#include "maxhdg/solver.hpp"

namespace {

using namespace maxhdg;

// Writes text to path atomically (temp file + rename) so failed runs never
// leave partial output; empty path means standard output.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file: " + tmp);
    out << text;
    out.flush();
    if (!out.good()) {
      std::remove(tmp.c_str());
      throw ConfigError("failed writing output file: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ConfigError("failed moving output into place: " + path);
  }
}

int resolve_degree(const std::string& tag, int degree) {
  if (!is_family_tag(tag)) {
    std::string known;
    for (const std::string& t : family_tags()) known += " " + t;
    throw ConfigError("unknown construction tag '" + tag + "'; known tags:" + known);
  }
  if (degree < 0) {
    if (family_degree_fixed(tag)) return 0;
    throw ConfigError("--degree is required for construction '" + tag + "'");
  }
  return degree;
}

ElementGeometry representative_element(const std::string& tag) {
  switch (family_shape(tag)) {
    case CellShape::triangle:
      return make_element(CellShape::triangle, {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    case CellShape::square:
      return make_element(CellShape::square,
                          {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}});
    case CellShape::parallelogram: {
      const double s3 = std::sqrt(3.0);
      return make_element(CellShape::parallelogram,
                          {{0.0, 0.0}, {1.0, 0.0}, {1.0 + s3 / 2.0, 0.5}, {s3 / 2.0, 0.5}});
    }
  }
  throw InternalError("unhandled cell shape");
}

Mesh build_mesh_for(const std::string& tag, int n) {
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

int single_level(const std::vector<int>& levels, const char* cmd) {
  if (levels.size() != 1) {
    throw ConfigError(std::string(cmd) + " takes exactly one --levels value (the mesh size n)");
  }
  if (levels[0] < 1) throw ConfigError("mesh size n must be >= 1");
  return levels[0];
}

struct Options {
  std::string element;
  int degree = -1;
  std::vector<int> levels;
  double tau = 1.0;
  std::string format = "csv";
  std::string out;
  int grid = 0;
};

int cmd_converge(const Options& opt) {
  const int k = resolve_degree(opt.element, opt.degree);
  StudyOptions sopts;
  sopts.tau = opt.tau;
  const ConvergenceReport report = run_convergence_study(opt.element, k, opt.levels, sopts);
  const ReportFormat fmt =
      (opt.format == "markdown") ? ReportFormat::markdown : ReportFormat::csv;
  emit(opt.out, render_report(report, fmt));
  if (report.any_resonance) {
    std::cerr << "warning: at least one level was skipped because of a resonance\n";
    return 2;
  }
  return 0;
}

int cmd_mdecomp(const Options& opt) {
  const int k = resolve_degree(opt.element, opt.degree);
  const SpaceFamily fam = build_family(opt.element, k, representative_element(opt.element));
  const MDecompReport report = verify_conditions(fam);
  emit(opt.out, format_report(report));
  return report.verdict ? 0 : 1;
}

int cmd_solve(const Options& opt) {
  const int k = resolve_degree(opt.element, opt.degree);
  const int n = single_level(opt.levels, "solve");
  const ExactSolution exact = manufactured_solution();
  const ProblemSpec spec = exact.problem(opt.tau);
  const Mesh mesh = build_mesh_for(opt.element, n);
  const CondensedSystem sys = assemble_global(mesh, opt.element, k, spec);
  const DiscreteSolution sol = solve(sys);
  const PostprocessSummary pp = postprocess_all(mesh, opt.element, k, sol);
  const ErrorNorms err = compute_errors(mesh, opt.element, k, sol, pp.ustar, exact);

  std::ostringstream out;
  out << "construction: " << opt.element << "\n";
  out << "degree: " << k << "\n";
  out << "n: " << n << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6e", mesh.h);
  out << "h: " << buf << "\n";
  out << "tau: " << opt.tau << "\n";
  out << "elements: " << mesh.elements.size() << "\n";
  out << "trace dofs: " << sys.rhs.size() << "\n";
  std::snprintf(buf, sizeof(buf), "%.3e", sol.solve_residual);
  out << "solve residual: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.3e", sol.flux_residual);
  out << "flux residual: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6e", err.u);
  out << "err_u: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6e", err.curl_u);
  out << "err_curl_u: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6e", err.q);
  out << "err_q: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6e", err.ustar);
  out << "err_ustar: " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6e", err.curl_ustar);
  out << "err_curl_ustar: " << buf << "\n";
  emit(opt.out, out.str());
  return 0;
}

int cmd_sample(const Options& opt) {
  const int k = resolve_degree(opt.element, opt.degree);
  const int n = single_level(opt.levels, "sample");
  if (opt.grid < 1) throw ConfigError("--grid must be >= 1");
  const ExactSolution exact = manufactured_solution();
  const ProblemSpec spec = exact.problem(opt.tau);
  const Mesh mesh = build_mesh_for(opt.element, n);
  const CondensedSystem sys = assemble_global(mesh, opt.element, k, spec);
  const DiscreteSolution sol = solve(sys);
  const PostprocessSummary pp = postprocess_all(mesh, opt.element, k, sol);
  emit(opt.out, sample_fields_csv(mesh, opt.element, k, sol, pp.ustar, opt.grid));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Hybridized finite-element solver for the 2D time-harmonic Maxwell system\n"
      "with certified local space constructions and superconvergent\n"
      "post-processing.\n\n"
      "The stabilization parameter tau (default 1.0, set with --tau) scales the\n"
      "tangential penalty; observed error magnitudes depend on it, observed\n"
      "convergence orders do not."};
  app.require_subcommand(1);
  app.footer(
      "Exit codes:\n"
      "  0  success (for 'mdecomp': certification verdict true)\n"
      "  1  configuration error, or certification verdict false\n"
      "  2  resonance (a level was skipped or a solve hit a discrete eigenvalue)\n"
      "  3  indeterminate numerical rank in the certification");

  Options opt;
  const std::string tag_help = "construction tag (see 'mdecomp --help' footer or README)";
  const std::string tau_help =
      "stabilization parameter tau > 0 (default 1.0; error magnitudes depend on it)";

  CLI::App* conv = app.add_subcommand(
      "converge", "Refinement study of the manufactured problem; prints error/rate table");
  conv->add_option("--element", opt.element, tag_help)->required();
  conv->add_option("--degree", opt.degree, "polynomial degree k");
  conv->add_option("--levels", opt.levels, "comma-separated ascending mesh sizes, e.g. 8,16,32")
      ->required()
      ->delimiter(',');
  conv->add_option("--tau", opt.tau, tau_help);
  conv->add_option("--format", opt.format, "output format (default csv)")
      ->check(CLI::IsMember({"csv", "markdown"}));
  conv->add_option("--out", opt.out, "output file (written atomically; default stdout)");

  CLI::App* mdec = app.add_subcommand(
      "mdecomp", "Certify the decomposition properties of a local space construction");
  mdec->add_option("--element", opt.element, tag_help)->required();
  mdec->add_option("--degree", opt.degree, "polynomial degree k (defaults to 0 for the fixed "
                                           "lowest-order rows)");
  mdec->add_option("--out", opt.out, "output file (written atomically; default stdout)");

  CLI::App* slv = app.add_subcommand(
      "solve", "Solve the manufactured problem on one mesh and print a summary");
  slv->add_option("--element", opt.element, tag_help)->required();
  slv->add_option("--degree", opt.degree, "polynomial degree k");
  slv->add_option("--levels", opt.levels, "single mesh size n")->required()->delimiter(',');
  slv->add_option("--tau", opt.tau, tau_help);
  slv->add_option("--out", opt.out, "output file (written atomically; default stdout)");

  CLI::App* smp = app.add_subcommand(
      "sample", "Solve once and write sampled fields (x,y,u1_h,u2_h,q_h,u1_star,u2_star) as CSV");
  smp->add_option("--element", opt.element, tag_help)->required();
  smp->add_option("--degree", opt.degree, "polynomial degree k");
  smp->add_option("--levels", opt.levels, "single mesh size n")->required()->delimiter(',');
  smp->add_option("--tau", opt.tau, tau_help);
  smp->add_option("--grid", opt.grid, "sample grid resolution m (m x m cell centers)")
      ->required();
  smp->add_option("--out", opt.out, "output file (written atomically; default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends: exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // uniform configuration-error code
  }

  try {
    if (conv->parsed()) return cmd_converge(opt);
    if (mdec->parsed()) return cmd_mdecomp(opt);
    if (slv->parsed()) return cmd_solve(opt);
    if (smp->parsed()) return cmd_sample(opt);
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const ResonanceError& e) {
    std::cerr << "resonance: " << e.what() << "\n";
    return 2;
  } catch (const IndeterminateRankError& e) {
    std::cerr << "indeterminate rank: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
