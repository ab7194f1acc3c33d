#include "odecf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace odecf {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unbiased bounded draw with an implementation-independent mapping, so
// sampled batches reproduce across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

bool user_sampleable(const InteractionDataset& ds, std::uint32_t user) {
  const std::size_t deg = ds.train_items[user].size();
  return deg >= 1 && deg < ds.num_items;
}

std::uint32_t draw_negative(const InteractionDataset& ds, std::uint32_t user,
                            std::mt19937_64& rng) {
  const auto& owned = ds.train_items[user];
  while (true) {
    const auto item = static_cast<std::uint32_t>(bounded(rng, ds.num_items));
    if (!std::binary_search(owned.begin(), owned.end(), item)) {
      return item;
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate(const TimeGrid& grid) const {
  if (lambda < 0.0) throw std::invalid_argument("train config: lambda must be nonnegative");
  if (lr_embed < 0.0) throw std::invalid_argument("train config: lr_embed must be nonnegative");
  if (lr_time < 0.0) throw std::invalid_argument("train config: lr_time must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be positive");
  if (patience < 1) throw std::invalid_argument("train config: patience must be positive");
  if (embed_dim < 1) throw std::invalid_argument("train config: embed_dim must be positive");
  if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be positive");
  if (topk < 1) throw std::invalid_argument("train config: topk must be positive");
  if (!(time_margin > 0.0)) throw std::invalid_argument("train config: time_margin must be positive");
  const auto times = grid.times();
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (time_margin >= times[i + 1] - times[i]) {
      throw std::invalid_argument("train config: time_margin must be below the smallest initial segment length");
    }
  }
}

BprBatch sample_batch(const InteractionDataset& ds, int batch_size, std::mt19937_64& rng) {
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be positive");
  bool any = false;
  for (std::uint32_t u = 0; u < ds.num_users && !any; ++u) any = user_sampleable(ds, u);
  if (!any) {
    throw std::invalid_argument("sample_batch: no user has both a training item and a negative candidate");
  }
  BprBatch batch;
  batch.triples.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    std::uint32_t user;
    do {
      user = static_cast<std::uint32_t>(bounded(rng, ds.num_users));
    } while (!user_sampleable(ds, user));
    const auto& owned = ds.train_items[user];
    const auto pos = owned[bounded(rng, owned.size())];
    const auto neg = draw_negative(ds, user, rng);
    batch.triples.push_back({user, pos, neg});
  }
  return batch;
}

BprBatch full_batch(const InteractionDataset& ds, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xf00dULL));
  BprBatch batch;
  batch.triples.reserve(ds.train_edges.size());
  for (const auto& [user, item] : ds.train_edges) {
    if (ds.train_items[user].size() >= ds.num_items) continue;  // nothing to rank against
    batch.triples.push_back({user, item, draw_negative(ds, user, rng)});
  }
  if (batch.triples.empty()) {
    throw std::invalid_argument("full_batch: no rankable training edge");
  }
  return batch;
}

double bpr_loss(const Matrix& user_final, const Matrix& item_final, const BprBatch& batch,
                const ModelParams& params, double lambda) {
  if (batch.triples.empty()) throw std::invalid_argument("bpr_loss: empty batch");
  const double b = static_cast<double>(batch.triples.size());
  double rank_term = 0.0;
  double reg_term = 0.0;
  for (const BprTriple& t : batch.triples) {
    const double r_pos = score(user_final, item_final, t.user, t.pos_item);
    const double r_neg = score(user_final, item_final, t.user, t.neg_item);
    rank_term += softplus(r_neg - r_pos);
    reg_term += params.user_embeddings.row(t.user).squaredNorm() +
                params.item_embeddings.row(t.pos_item).squaredNorm() +
                params.item_embeddings.row(t.neg_item).squaredNorm();
  }
  return rank_term / b + lambda * reg_term / b;
}

GradientBundle backward(const InteractionGraph& g, const ModelParams& params,
                        const BprBatch& batch, const Trajectory& traj, double lambda) {
  if (!traj.has_tape()) {
    throw std::invalid_argument("backward: trajectory carries no stage recording");
  }
  if (batch.triples.empty()) throw std::invalid_argument("backward: empty batch");
  const Index n_users = params.num_users();
  const Index n_items = params.num_items();
  const Index dim = params.dim();
  const double b = static_cast<double>(batch.triples.size());

  auto [user_final, item_final] = layer_combination(traj.snapshots, params.grid);

  Matrix grad_final = Matrix::Zero(n_users + n_items, dim);
  double rank_term = 0.0;
  double reg_term = 0.0;
  for (const BprTriple& t : batch.triples) {
    if (t.user >= n_users || t.pos_item >= n_items || t.neg_item >= n_items) {
      throw std::invalid_argument("backward: batch index out of range");
    }
    const double margin = user_final.row(t.user).dot(item_final.row(t.neg_item)) -
                          user_final.row(t.user).dot(item_final.row(t.pos_item));
    rank_term += softplus(margin);
    const double slope = sigmoid(margin) / b;
    grad_final.row(t.user) +=
        slope * (item_final.row(t.neg_item) - item_final.row(t.pos_item));
    grad_final.row(n_users + t.neg_item) += slope * user_final.row(t.user);
    grad_final.row(n_users + t.pos_item) -= slope * user_final.row(t.user);
    reg_term += params.user_embeddings.row(t.user).squaredNorm() +
                params.item_embeddings.row(t.pos_item).squaredNorm() +
                params.item_embeddings.row(t.neg_item).squaredNorm();
  }

  std::vector<std::pair<std::int32_t, Matrix>> seeds;
  seeds.reserve(traj.snapshot_nodes.size());
  for (std::size_t j = 0; j < traj.snapshot_nodes.size(); ++j) {
    seeds.emplace_back(traj.snapshot_nodes[j], params.grid.weights[j] * grad_final);
  }
  Matrix adj0 = tape_backward(*traj.tape, g, std::move(seeds));
  for (const BprTriple& t : batch.triples) {
    const double c = 2.0 * lambda / b;
    adj0.row(t.user) += c * params.user_embeddings.row(t.user);
    adj0.row(n_users + t.pos_item) += c * params.item_embeddings.row(t.pos_item);
    adj0.row(n_users + t.neg_item) += c * params.item_embeddings.row(t.neg_item);
  }

  GradientBundle bundle;
  bundle.d_user_embeddings = adj0.topRows(n_users);
  bundle.d_item_embeddings = adj0.bottomRows(n_items);
  bundle.loss_value = rank_term / b + lambda * reg_term / b;
  bundle.d_times.assign(params.grid.t_count(), 0.0);
  if (traj.has_time_tangents()) {
    for (int i = 0; i < params.grid.t_count(); ++i) {
      bundle.d_times[i] = params.grid.weights[i + 1] *
                          (grad_final.array() * traj.time_tangents[i].array()).sum();
    }
  }
  if (!bundle.d_user_embeddings.allFinite() || !bundle.d_item_embeddings.allFinite() ||
      !std::isfinite(bundle.loss_value)) {
    throw DivergenceError("backward: non-finite gradient");
  }
  return bundle;
}

TimeGrid apply_time_update(const TimeGrid& grid, std::span<const double> d_times,
                           double lr_time, double time_margin) {
  grid.validate();
  const int t_count = grid.t_count();
  if (static_cast<int>(d_times.size()) != t_count) {
    throw std::invalid_argument("apply_time_update: gradient count does not match the grid");
  }
  std::vector<double> raw(t_count);
  for (int i = 0; i < t_count; ++i) {
    raw[i] = grid.interior[i] - lr_time * d_times[i];
  }
  TimeGrid out = grid;
  double prev = 0.0;
  for (int i = 0; i < t_count; ++i) {
    // Upper bound: the raw next time, capped so later times keep one margin
    // of room each; the lower bound wins when they cross.
    const double budget = grid.terminal - (t_count - 1 - i) * time_margin;
    const double hi = std::min(i + 1 < t_count ? raw[i + 1] : std::numeric_limits<double>::infinity(),
                               budget) - time_margin;
    const double lo = prev + time_margin;
    out.interior[i] = std::max(lo, std::min(raw[i], hi));
    prev = out.interior[i];
  }
  return out;
}

void AdamState::init(Index rows, Index cols) {
  m = Matrix::Zero(rows, cols);
  v = Matrix::Zero(rows, cols);
  t = 0;
}

void AdamState::update(Matrix& param, const Matrix& grad, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t;
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square();
  const double m_corr = 1.0 - std::pow(kBeta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(kBeta2, static_cast<double>(t));
  param.array() -= lr * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + kEps);
}

std::string TrainingCurves::to_csv() const {
  std::ostringstream out;
  out << "epoch,loss,recall,ndcg";
  const std::size_t t_count = rows.empty() ? 0 : rows.front().times.size();
  for (std::size_t i = 1; i <= t_count; ++i) out << ",t_" << i;
  out << "\n";
  for (const EpochRecord& r : rows) {
    out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.recall) << ","
        << format_double(r.ndcg);
    for (double t : r.times) out << "," << format_double(t);
    out << "\n";
  }
  return out.str();
}

TrainResult train(const InteractionDataset& ds, const InteractionGraph& g,
                  const TrainConfig& cfg, const SolverConfig& solver_cfg,
                  const TimeGrid& initial_grid, const EvalCallback& on_eval) {
  initial_grid.validate();
  cfg.validate(initial_grid);
  solver_cfg.validate();

  ModelParams params;
  std::tie(params.user_embeddings, params.item_embeddings) =
      init_embeddings(ds.num_users, ds.num_items, cfg.embed_dim, cfg.seed);
  params.grid = initial_grid;
  params.validate_shapes(g);

  const bool learn_time = initial_grid.learnable && cfg.lr_time > 0.0;
  AdamState adam_user;
  AdamState adam_item;
  adam_user.init(params.num_users(), params.dim());
  adam_item.init(params.num_items(), params.dim());

  BprBatch fixed;
  if (cfg.full_batch) fixed = full_batch(ds, cfg.seed);
  const int batches_per_epoch =
      cfg.full_batch
          ? 1
          : static_cast<int>((ds.num_train_edges() + cfg.batch_size - 1) / cfg.batch_size);

  IntegrateOptions opts;
  opts.record_tape = true;
  opts.time_tangents = learn_time;

  TrainResult result;
  double best_recall = -1.0;
  int evals_without_improvement = 0;
  double last_recall = 0.0;
  double last_ndcg = 0.0;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      const BprBatch batch = cfg.full_batch ? fixed : sample_batch(ds, cfg.batch_size, rng);
      const Trajectory traj = integrate_grid(g, params, solver_cfg, opts);
      const GradientBundle bundle = backward(g, params, batch, traj, cfg.lambda);
      if (!std::isfinite(bundle.loss_value)) {
        throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch));
      }
      adam_user.update(params.user_embeddings, bundle.d_user_embeddings, cfg.lr_embed);
      adam_item.update(params.item_embeddings, bundle.d_item_embeddings, cfg.lr_embed);
      if (learn_time) {
        params.grid = apply_time_update(params.grid, bundle.d_times, cfg.lr_time, cfg.time_margin);
      }
      loss_sum += bundle.loss_value;
    }

    const bool last_epoch = epoch == cfg.max_epochs;
    if (epoch == 1 || epoch % cfg.eval_every == 0 || last_epoch) {
      const ModelParams snapshot = params.persistable();
      EvalReport report = evaluate(snapshot, g, ds, solver_cfg, cfg.topk);
      report.wall_time_train_s = elapsed();
      const bool improved = report.recall_at_k > best_recall;
      if (improved) {
        best_recall = report.recall_at_k;
        result.best_params = snapshot;
        result.best_eval = report;
        evals_without_improvement = 0;
      } else {
        ++evals_without_improvement;
      }
      if (on_eval) on_eval(epoch, report, snapshot, improved);
      last_recall = report.recall_at_k;
      last_ndcg = report.ndcg_at_k;
    }

    EpochRecord row;
    row.epoch = epoch;
    row.loss = loss_sum / batches_per_epoch;
    row.recall = last_recall;
    row.ndcg = last_ndcg;
    row.times = params.grid.interior;
    result.curves.rows.push_back(std::move(row));
    result.epochs_run = epoch;

    if (evals_without_improvement >= cfg.patience) break;
  }

  result.params = std::move(params);
  result.wall_time_train_s = elapsed();
  if (result.best_params.user_embeddings.size() == 0) {
    result.best_params = result.params.persistable();
  }
  return result;
}

}  // namespace odecf
