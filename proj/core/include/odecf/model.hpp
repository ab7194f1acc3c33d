#pragma once

#include "odecf/graph.hpp"
#include "odecf/types.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace odecf {

// User and item embeddings at a common time, stored as one joint matrix with
// user rows on top. The solvers advance the joint state; the blocks give the
// per-side views.
struct EmbeddingState {
  Index user_count = 0;
  double time = 0.0;
  Matrix joint;  // (user_count + item_count) x dim

  Index item_count() const { return joint.rows() - user_count; }
  Index dim() const { return joint.cols(); }

  auto users() { return joint.topRows(user_count); }
  auto users() const { return joint.topRows(user_count); }
  auto items() { return joint.bottomRows(item_count()); }
  auto items() const { return joint.bottomRows(item_count()); }

  static EmbeddingState zeros(Index n_users, Index n_items, Index dim);
  static EmbeddingState from_parts(const Eigen::Ref<const Matrix>& users,
                                   const Eigen::Ref<const Matrix>& items, double time);
};

// Snapshot schedule for the layer combination: interior times t_1 < ... < t_T
// strictly inside (0, terminal), plus one weight per snapshot including the
// endpoints (T + 2 weights). Weights default to uniform and are not trained.
struct TimeGrid {
  double terminal = 4.0;
  std::vector<double> interior;
  std::vector<double> weights;
  bool learnable = true;

  int t_count() const { return static_cast<int>(interior.size()); }
  int snapshot_count() const { return t_count() + 2; }

  // All snapshot times: {0, t_1, ..., t_T, terminal}.
  std::vector<double> times() const;

  // Uniform interior spacing t_i = terminal/(T+1) * i and uniform weights.
  static TimeGrid uniform(double terminal, int t_count);

  void validate() const;  // throws std::invalid_argument
};

// Trainable state: the initial embeddings plus the time grid.
struct ModelParams {
  Matrix user_embeddings;  // N x D
  Matrix item_embeddings;  // M x D
  TimeGrid grid;

  Index num_users() const { return user_embeddings.rows(); }
  Index num_items() const { return item_embeddings.rows(); }
  Index dim() const { return user_embeddings.cols(); }

  EmbeddingState initial_state() const;

  // Copy with embeddings rounded through f32, i.e. exactly what a checkpoint
  // stores. Training evaluates this snapshot so persisted and in-training
  // metrics agree bit for bit.
  ModelParams persistable() const;

  void validate_shapes(const InteractionGraph& g) const;  // throws std::invalid_argument
};

// i.i.d. normal(0, 0.1) initial embeddings, reproducible per seed (own
// Box-Muller over SplitMix-seeded mt19937_64, so the stream does not depend
// on the standard library's distribution implementation).
std::pair<Matrix, Matrix> init_embeddings(Index n_users, Index n_items, Index dim,
                                          std::uint64_t seed);

// Joint ODE derivative: top block gets adj_user_from_item * items, bottom
// block gets adj_item_from_user * users; the laplacian kind subtracts the
// input state. out is resized to match z.
void joint_derivative(const InteractionGraph& g, const Matrix& z, Matrix& out);

// Single-side derivative for the adjacency kind. The laplacian kind needs
// the same-side state for its identity term, hence the second overload.
Matrix derivative_users(const InteractionGraph& g, const Eigen::Ref<const Matrix>& item_state);
Matrix derivative_items(const InteractionGraph& g, const Eigen::Ref<const Matrix>& user_state);
Matrix derivative_users(const InteractionGraph& g, const Eigen::Ref<const Matrix>& item_state,
                        const Eigen::Ref<const Matrix>& user_state);
Matrix derivative_items(const InteractionGraph& g, const Eigen::Ref<const Matrix>& user_state,
                        const Eigen::Ref<const Matrix>& item_state);

// Weighted sum of snapshots per the grid weights. Snapshot times must match
// the grid exactly and count T + 2.
std::pair<Matrix, Matrix> layer_combination(std::span<const EmbeddingState> states,
                                            const TimeGrid& grid);

// Dot product of one user row with one item row; throws on out-of-range.
double score(const Matrix& user_final, const Matrix& item_final, Index user, Index item);

// Reference linear graph-convolution forward (LightGCN): iterate the
// propagation K times from the initial embeddings and average the K + 1
// states with equal weights. Serves as the equivalence oracle for the
// euler/s=1/no-residual/unit-grid solver configuration.
std::pair<Matrix, Matrix> lightgcn_forward(const InteractionGraph& g,
                                           const Eigen::Ref<const Matrix>& user0,
                                           const Eigen::Ref<const Matrix>& item0, int layers);

}  // namespace odecf
