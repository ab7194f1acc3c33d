#include <benchmark/benchmark.h>

#include "odecf/graph.hpp"
#include "support/synthetic.hpp"

using namespace odecf;

static void BM_Spmm(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const int degree = static_cast<int>(state.range(1));
  const auto ds = testsupport::random_dataset(n, n, degree, 7);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix dense = testsupport::random_matrix(n, 64, 1.0, 3);
  Matrix out(n, 64);
  for (auto _ : state) {
    spmm_into(g.adj_user_from_item, dense, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.adj_user_from_item.nnz()));
}
BENCHMARK(BM_Spmm)->Args({1000, 16})->Args({10000, 32})->Args({30000, 32});

static void BM_Transpose(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto ds = testsupport::random_dataset(n, n, 32, 9);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  for (auto _ : state) {
    auto t = transpose(g.adj_user_from_item);
    benchmark::DoNotOptimize(t.values.data());
  }
}
BENCHMARK(BM_Transpose)->Arg(10000);

BENCHMARK_MAIN();
