#pragma once

#include "odecf/dataset.hpp"
#include "odecf/evaluation.hpp"
#include "odecf/graph.hpp"
#include "odecf/model.hpp"
#include "odecf/solver.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace odecf {

struct TrainConfig {
  double lambda = 1e-4;      // L2 coefficient on batch-participant initial embeddings
  double lr_embed = 1e-4;    // Adam learning rate for the embeddings
  double lr_time = 1e-6;     // plain gradient step for the interior times
  int batch_size = 2048;
  int max_epochs = 1000;
  int patience = 10;         // evaluations without recall improvement
  std::uint64_t seed = 0;
  double time_margin = 1e-3; // minimum gap kept between consecutive times

  int embed_dim = 64;
  int eval_every = 10;       // epochs between test-set evaluations
  int topk = 20;
  // Train on one fixed batch holding every training edge once, with
  // negatives sampled once from the run seed. Makes the per-epoch loss a
  // deterministic function of the parameters.
  bool full_batch = false;

  void validate(const TimeGrid& grid) const;  // throws std::invalid_argument
};

struct BprTriple {
  std::uint32_t user;
  std::uint32_t pos_item;
  std::uint32_t neg_item;
};

struct BprBatch {
  std::vector<BprTriple> triples;
};

// Users uniform with replacement; positive uniform over the user's training
// items; negative uniform over the complement by rejection. Users with no
// training item or with every item are skipped and redrawn; if no user
// qualifies, throws std::invalid_argument.
BprBatch sample_batch(const InteractionDataset& ds, int batch_size, std::mt19937_64& rng);

// One fixed triple per training edge (for full-batch mode).
BprBatch full_batch(const InteractionDataset& ds, std::uint64_t seed);

// Mean over triples of softplus(r_neg - r_pos) plus lambda times the squared
// norms of the participants' initial embedding rows, averaged over the batch.
double bpr_loss(const Matrix& user_final, const Matrix& item_final, const BprBatch& batch,
                const ModelParams& params, double lambda);

struct GradientBundle {
  Matrix d_user_embeddings;
  Matrix d_item_embeddings;
  std::vector<double> d_times;  // size T; zeros when tangents were not recorded
  double loss_value = 0.0;
};

// Exact reverse-mode gradient of the batch loss through the layer combination
// and every recorded solver stage (transposed replay of the trajectory tape),
// plus the analytic time gradients: d_t[i] pairs the layer-combination
// adjoint of snapshot i with that snapshot's recorded end-time tangent, all
// other parts held fixed per the alternating scheme. The trajectory must
// carry a tape; throws std::invalid_argument otherwise. Throws
// DivergenceError on non-finite gradients.
GradientBundle backward(const InteractionGraph& g, const ModelParams& params,
                        const BprBatch& batch, const Trajectory& traj, double lambda);

// Gradient step on the interior times followed by a sequential projection
// that restores strict ordering: ascending in i, t_i is clamped into
// [t_{i-1} + margin, min(raw t_{i+1}, remaining budget) - margin] with the
// lower bound taking precedence.
TimeGrid apply_time_update(const TimeGrid& grid, std::span<const double> d_times,
                           double lr_time, double time_margin);

struct AdamState {
  Matrix m;
  Matrix v;
  std::int64_t t = 0;

  void init(Index rows, Index cols);
  void update(Matrix& param, const Matrix& grad, double lr);
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double recall = 0.0;  // most recent evaluation
  double ndcg = 0.0;
  std::vector<double> times;
};

struct TrainingCurves {
  std::vector<EpochRecord> rows;
  std::string to_csv() const;  // header: epoch,loss,recall,ndcg,t_1,...,t_T
};

struct TrainResult {
  ModelParams params;       // final parameters
  ModelParams best_params;  // persistable snapshot at the best evaluation
  TrainingCurves curves;
  EvalReport best_eval;
  double wall_time_train_s = 0.0;
  int epochs_run = 0;
};

// Called after each evaluation with the persistable snapshot; improved is
// true when recall reached a new best (checkpoint hook).
using EvalCallback = std::function<void(int epoch, const EvalReport&, const ModelParams&, bool improved)>;

// Alternating optimization: per batch, one Adam step on the initial
// embeddings from the reverse-mode gradients, then one projected gradient
// step on the interior times. Evaluates every eval_every epochs (plus the
// first and last) on the persistable snapshot and early-stops after
// `patience` evaluations without recall improvement. Reproducible: batch
// sampling derives a fresh RNG from (seed, epoch).
// Throws DivergenceError when the loss turns non-finite.
TrainResult train(const InteractionDataset& ds, const InteractionGraph& g,
                  const TrainConfig& cfg, const SolverConfig& solver_cfg,
                  const TimeGrid& initial_grid, const EvalCallback& on_eval = {});

}  // namespace odecf
