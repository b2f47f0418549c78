// Microbenchmarks comparing the serial reference implementation against the
// OpenMP execution policy for the element-parallel kernels: global assembly
// with static condensation, post-processing, and error integration.
#include <benchmark/benchmark.h>

#include "maxhdg/analysis.hpp"
#include "maxhdg/solver.hpp"

namespace {

using namespace maxhdg;

ProblemSpec make_spec() {
  const ExactSolution exact = manufactured_solution();
  return exact.problem(1.0);
}

void bm_assemble(benchmark::State& state, ExecPolicy exec) {
  const int n = static_cast<int>(state.range(0));
  const Mesh mesh = build_triangle_mesh(n);
  const ProblemSpec spec = make_spec();
  for (auto _ : state) {
    CondensedSystem sys = assemble_global(mesh, "tri-pk", 2, spec, exec);
    benchmark::DoNotOptimize(sys.rhs.norm());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(mesh.elements.size()));
}

void bm_postprocess(benchmark::State& state, ExecPolicy exec) {
  const int n = static_cast<int>(state.range(0));
  const Mesh mesh = build_triangle_mesh(n);
  const ProblemSpec spec = make_spec();
  const CondensedSystem sys = assemble_global(mesh, "tri-pk", 2, spec, ExecPolicy::parallel);
  const DiscreteSolution sol = solve(sys);
  for (auto _ : state) {
    PostprocessSummary pp = postprocess_all(mesh, "tri-pk", 2, sol, exec);
    benchmark::DoNotOptimize(pp.max_eta);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(mesh.elements.size()));
}

void bm_errors(benchmark::State& state, ExecPolicy exec) {
  const int n = static_cast<int>(state.range(0));
  const Mesh mesh = build_triangle_mesh(n);
  const ExactSolution exact = manufactured_solution();
  const ProblemSpec spec = exact.problem(1.0);
  const CondensedSystem sys = assemble_global(mesh, "tri-pk", 2, spec, ExecPolicy::parallel);
  const DiscreteSolution sol = solve(sys);
  const PostprocessSummary pp = postprocess_all(mesh, "tri-pk", 2, sol, ExecPolicy::parallel);
  for (auto _ : state) {
    ErrorNorms err = compute_errors(mesh, "tri-pk", 2, sol, pp.ustar, exact, 20, exec);
    benchmark::DoNotOptimize(err.u);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(mesh.elements.size()));
}

}  // namespace

BENCHMARK_CAPTURE(bm_assemble, serial, ExecPolicy::serial)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_assemble, parallel, ExecPolicy::parallel)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_postprocess, serial, ExecPolicy::serial)
    ->Arg(16)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_postprocess, parallel, ExecPolicy::parallel)
    ->Arg(16)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_errors, serial, ExecPolicy::serial)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_errors, parallel, ExecPolicy::parallel)
    ->Arg(16)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
