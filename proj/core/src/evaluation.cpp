#include "odecf/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace odecf {

namespace {

// Candidate ordering: score descending, item index ascending on ties.
struct Entry {
  double score;
  std::uint32_t item;
};

bool better(const Entry& a, const Entry& b) {
  return a.score > b.score || (a.score == b.score && a.item < b.item);
}

// Single pass top-k selection over a score row, skipping excluded items.
// `heap` holds the current best k with the worst candidate at the front.
std::vector<std::uint32_t> top_k_scores(const double* scores, std::uint32_t n_items,
                                        const std::vector<std::uint32_t>& exclude, int k) {
  auto worse = [](const Entry& a, const Entry& b) { return better(a, b); };  // min-heap
  std::vector<Entry> heap;
  heap.reserve(k);
  auto excluded_it = exclude.begin();
  for (std::uint32_t item = 0; item < n_items; ++item) {
    while (excluded_it != exclude.end() && *excluded_it < item) ++excluded_it;
    if (excluded_it != exclude.end() && *excluded_it == item) continue;
    const Entry e{scores[item], item};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (better(e, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end(), worse);
    }
  }
  std::sort(heap.begin(), heap.end(), better);
  std::vector<std::uint32_t> out;
  out.reserve(heap.size());
  for (const Entry& e : heap) out.push_back(e.item);
  return out;
}

double log2_gain(int rank) { return 1.0 / std::log2(static_cast<double>(rank) + 2.0); }

}  // namespace

std::vector<std::uint32_t> rank_items(const Matrix& user_final, const Matrix& item_final,
                                      Index user, const std::vector<std::uint32_t>& exclude,
                                      int k) {
  if (user < 0 || user >= user_final.rows()) {
    throw std::invalid_argument("rank_items: user index out of range");
  }
  if (k < 1) throw std::invalid_argument("rank_items: k must be positive");
  const Vector scores = item_final * user_final.row(user).transpose();
  return top_k_scores(scores.data(), static_cast<std::uint32_t>(item_final.rows()), exclude, k);
}

double recall_at_k(const std::vector<std::uint32_t>& ranked,
                   const std::vector<std::uint32_t>& test_items, int k) {
  if (test_items.empty()) throw std::invalid_argument("recall_at_k: empty test set");
  const std::size_t cutoff = std::min<std::size_t>(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < cutoff; ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), ranked[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

double ndcg_at_k(const std::vector<std::uint32_t>& ranked,
                 const std::vector<std::uint32_t>& test_items, int k) {
  if (test_items.empty()) throw std::invalid_argument("ndcg_at_k: empty test set");
  const std::size_t cutoff = std::min<std::size_t>(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < cutoff; ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), ranked[r])) {
      dcg += log2_gain(static_cast<int>(r));
    }
  }
  const std::size_t ideal = std::min<std::size_t>(k, test_items.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) idcg += log2_gain(static_cast<int>(r));
  return dcg / idcg;
}

EvalReport evaluate_embeddings(const Matrix& user_final, const Matrix& item_final,
                               const InteractionDataset& ds, int k) {
  if (k < 1) throw std::invalid_argument("evaluate: k must be positive");
  if (ds.test_edges_by_user.empty()) {
    throw std::invalid_argument("evaluate: no user has test interactions");
  }
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::uint32_t> users;
  users.reserve(ds.test_edges_by_user.size());
  for (const auto& [user, items] : ds.test_edges_by_user) {
    if (!items.empty()) users.push_back(user);
  }
  if (users.empty()) {
    throw std::invalid_argument("evaluate: no user has test interactions");
  }

  const std::uint32_t n_items = static_cast<std::uint32_t>(item_final.rows());
  // Full-matrix path for small problems, 1024-user panels otherwise.
  const bool small = static_cast<double>(user_final.rows()) * item_final.rows() <= 1e7;
  const std::size_t block = small ? users.size() : std::size_t{1024};

  std::vector<double> user_recall(users.size(), 0.0);
  std::vector<double> user_ndcg(users.size(), 0.0);

  for (std::size_t begin = 0; begin < users.size(); begin += block) {
    const std::size_t end = std::min(begin + block, users.size());
    Matrix rows(end - begin, user_final.cols());
    for (std::size_t i = begin; i < end; ++i) rows.row(i - begin) = user_final.row(users[i]);
    const Matrix panel = rows * item_final.transpose();
    const auto count = static_cast<Index>(end - begin);
#pragma omp parallel for schedule(static)
    for (Index local = 0; local < count; ++local) {
      const std::uint32_t user = users[begin + local];
      const auto ranked = top_k_scores(panel.row(local).data(), n_items, ds.train_items[user], k);
      const auto& test = ds.test_edges_by_user.at(user);
      user_recall[begin + local] = recall_at_k(ranked, test, k);
      user_ndcg[begin + local] = ndcg_at_k(ranked, test, k);
    }
  }

  // Fixed-order reduction keeps the report identical for any thread count.
  double recall_sum = 0.0;
  double ndcg_sum = 0.0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    recall_sum += user_recall[i];
    ndcg_sum += user_ndcg[i];
  }

  EvalReport report;
  report.k = k;
  report.users_evaluated = static_cast<std::int64_t>(users.size());
  report.recall_at_k = recall_sum / static_cast<double>(users.size());
  report.ndcg_at_k = ndcg_sum / static_cast<double>(users.size());
  report.wall_time_infer_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport evaluate(const ModelParams& params, const InteractionGraph& g,
                    const InteractionDataset& ds, const SolverConfig& cfg, int k) {
  params.validate_shapes(g);
  const auto start = std::chrono::steady_clock::now();
  const Trajectory traj = integrate_grid(g, params, cfg);
  const auto [user_final, item_final] = layer_combination(traj.snapshots, params.grid);
  EvalReport report = evaluate_embeddings(user_final, item_final, ds, k);
  report.wall_time_infer_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace odecf
