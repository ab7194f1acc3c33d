#include <benchmark/benchmark.h>

#include "odecf/solver.hpp"
#include "support/synthetic.hpp"

using namespace odecf;

namespace {

struct Setup {
  InteractionGraph graph;
  ModelParams params;
  Setup(std::uint32_t n, int dim) {
    const auto ds = testsupport::random_dataset(n, n, 32, 11);
    graph = build_graph(ds, OperatorKind::NormalizedAdjacency);
    std::tie(params.user_embeddings, params.item_embeddings) =
        init_embeddings(ds.num_users, ds.num_items, dim, 1);
    params.grid = TimeGrid::uniform(4.0, 3);
  }
};

}  // namespace

static void BM_IntegrateGrid(benchmark::State& state) {
  const Setup setup(static_cast<std::uint32_t>(state.range(0)), 64);
  const auto kind = static_cast<SolverKind>(state.range(1));
  const SolverConfig cfg = SolverConfig::for_kind(kind);
  for (auto _ : state) {
    const Trajectory traj = integrate_grid(setup.graph, setup.params, cfg);
    benchmark::DoNotOptimize(traj.snapshots.back().joint.data());
  }
}
BENCHMARK(BM_IntegrateGrid)
    ->Args({2000, static_cast<int>(SolverKind::Euler)})
    ->Args({2000, static_cast<int>(SolverKind::RungeKutta4)})
    ->Args({2000, static_cast<int>(SolverKind::AdamsMoulton)})
    ->Args({2000, static_cast<int>(SolverKind::Dopri)});

static void BM_IntegrateGridWithTape(benchmark::State& state) {
  const Setup setup(2000, 64);
  const SolverConfig cfg = SolverConfig::for_kind(SolverKind::RungeKutta4);
  IntegrateOptions opts;
  opts.record_tape = true;
  opts.time_tangents = state.range(0) != 0;
  for (auto _ : state) {
    const Trajectory traj = integrate_grid(setup.graph, setup.params, cfg, opts);
    benchmark::DoNotOptimize(traj.snapshots.back().joint.data());
  }
}
BENCHMARK(BM_IntegrateGridWithTape)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
