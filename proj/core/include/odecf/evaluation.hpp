#pragma once

#include "odecf/dataset.hpp"
#include "odecf/model.hpp"
#include "odecf/solver.hpp"

#include <cstdint>
#include <vector>

namespace odecf {

struct EvalReport {
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  int k = 20;
  std::int64_t users_evaluated = 0;
  double wall_time_train_s = 0.0;
  double wall_time_infer_s = 0.0;
};

// Top-k items for one user by descending score, ties broken by ascending item
// index. exclude must be sorted ascending (the user's training items). When
// fewer than k candidates exist, all of them are returned ranked.
std::vector<std::uint32_t> rank_items(const Matrix& user_final, const Matrix& item_final,
                                      Index user, const std::vector<std::uint32_t>& exclude,
                                      int k);

// |top-k hits| / |test_items|. test_items must be nonempty and sorted.
double recall_at_k(const std::vector<std::uint32_t>& ranked,
                   const std::vector<std::uint32_t>& test_items, int k);

// Binary-relevance NDCG: DCG over hit ranks with 1/log2(rank+2) gains,
// normalized by the ideal prefix.
double ndcg_at_k(const std::vector<std::uint32_t>& ranked,
                 const std::vector<std::uint32_t>& test_items, int k);

// All-ranking evaluation of already-combined final embeddings: every user
// with a nonempty test set is scored against all non-training items, in user
// blocks against dense score panels. Deterministic for any thread count.
// Throws std::invalid_argument when no user has test items.
EvalReport evaluate_embeddings(const Matrix& user_final, const Matrix& item_final,
                               const InteractionDataset& ds, int k);

// Full protocol: one forward pass (grid integration + layer combination),
// then evaluate_embeddings.
EvalReport evaluate(const ModelParams& params, const InteractionGraph& g,
                    const InteractionDataset& ds, const SolverConfig& cfg, int k = 20);

}  // namespace odecf
