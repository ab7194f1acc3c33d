#include <benchmark/benchmark.h>

#include "odecf/evaluation.hpp"
#include "support/synthetic.hpp"

using namespace odecf;

static void BM_EvaluateEmbeddings(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto ds = testsupport::planted_dataset(static_cast<int>(n) / 10, 10, 10, 8, 3);
  const Matrix eu = testsupport::random_matrix(ds.num_users, 64, 1.0, 1);
  const Matrix ep = testsupport::random_matrix(ds.num_items, 64, 1.0, 2);
  for (auto _ : state) {
    const EvalReport report = evaluate_embeddings(eu, ep, ds, 20);
    benchmark::DoNotOptimize(report.recall_at_k);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.num_users));
}
BENCHMARK(BM_EvaluateEmbeddings)->Arg(1000)->Arg(5000);

static void BM_RankItems(benchmark::State& state) {
  const auto m = static_cast<std::uint32_t>(state.range(0));
  const Matrix eu = testsupport::random_matrix(1, 64, 1.0, 1);
  const Matrix ep = testsupport::random_matrix(m, 64, 1.0, 2);
  const std::vector<std::uint32_t> exclude = {1, 5, 9, 200, 999};
  for (auto _ : state) {
    const auto ranked = rank_items(eu, ep, 0, exclude, 20);
    benchmark::DoNotOptimize(ranked.data());
  }
}
BENCHMARK(BM_RankItems)->Arg(40000)->Arg(90000);

BENCHMARK_MAIN();
