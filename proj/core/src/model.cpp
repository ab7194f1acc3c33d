#include "odecf/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace odecf {

EmbeddingState EmbeddingState::zeros(Index n_users, Index n_items, Index dim) {
  EmbeddingState s;
  s.user_count = n_users;
  s.joint = Matrix::Zero(n_users + n_items, dim);
  return s;
}

EmbeddingState EmbeddingState::from_parts(const Eigen::Ref<const Matrix>& users,
                                          const Eigen::Ref<const Matrix>& items, double time) {
  if (users.cols() != items.cols()) {
    throw std::invalid_argument("embedding state: user/item dimensionality disagrees");
  }
  EmbeddingState s;
  s.user_count = users.rows();
  s.time = time;
  s.joint.resize(users.rows() + items.rows(), users.cols());
  s.joint.topRows(users.rows()) = users;
  s.joint.bottomRows(items.rows()) = items;
  return s;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out;
  out.reserve(interior.size() + 2);
  out.push_back(0.0);
  out.insert(out.end(), interior.begin(), interior.end());
  out.push_back(terminal);
  return out;
}

TimeGrid TimeGrid::uniform(double terminal, int t_count) {
  TimeGrid grid;
  grid.terminal = terminal;
  grid.interior.resize(t_count);
  for (int i = 1; i <= t_count; ++i) {
    grid.interior[i - 1] = terminal / (t_count + 1) * i;
  }
  grid.weights.assign(t_count + 2, 1.0 / (t_count + 2));
  return grid;
}

void TimeGrid::validate() const {
  if (!(terminal > 0.0)) {
    throw std::invalid_argument("time grid: terminal time must be positive");
  }
  double prev = 0.0;
  for (double t : interior) {
    if (!(t > prev) || !(t < terminal)) {
      throw std::invalid_argument("time grid: interior times must be strictly increasing in (0, terminal)");
    }
    prev = t;
  }
  if (weights.size() != interior.size() + 2) {
    throw std::invalid_argument("time grid: weight count must be t_count + 2");
  }
}

EmbeddingState ModelParams::initial_state() const {
  return EmbeddingState::from_parts(user_embeddings, item_embeddings, 0.0);
}

ModelParams ModelParams::persistable() const {
  ModelParams p = *this;
  p.user_embeddings = user_embeddings.cast<float>().cast<double>();
  p.item_embeddings = item_embeddings.cast<float>().cast<double>();
  return p;
}

void ModelParams::validate_shapes(const InteractionGraph& g) const {
  if (num_users() != g.num_users() || num_items() != g.num_items()) {
    throw std::invalid_argument("model params: embedding row counts do not match the graph");
  }
  if (user_embeddings.cols() != item_embeddings.cols()) {
    throw std::invalid_argument("model params: user/item dimensionality disagrees");
  }
  grid.validate();
}

namespace {

// Deterministic normal sampler (Box-Muller over mt19937_64), independent of
// the standard library's distribution implementation.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()(double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * stddev;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1p-53;  // (0, 1]
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1p-53;          // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle) * stddev;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void fill_normal(Matrix& m, NormalSampler& sampler, double stddev) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      m(r, c) = sampler(stddev);
    }
  }
}

}  // namespace

std::pair<Matrix, Matrix> init_embeddings(Index n_users, Index n_items, Index dim,
                                          std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || dim < 1) {
    throw std::invalid_argument("init_embeddings: counts and dimension must be >= 1");
  }
  NormalSampler sampler(mix_seed(seed, 0x0e5bed));
  Matrix users(n_users, dim);
  Matrix items(n_items, dim);
  fill_normal(users, sampler, 0.1);
  fill_normal(items, sampler, 0.1);
  return {std::move(users), std::move(items)};
}

void joint_derivative(const InteractionGraph& g, const Matrix& z, Matrix& out) {
  const Index n_users = g.num_users();
  const Index n_items = g.num_items();
  if (z.rows() != n_users + n_items) {
    throw std::invalid_argument("joint_derivative: state rows do not match the graph");
  }
  out.resize(z.rows(), z.cols());
  spmm_into(g.adj_user_from_item, z.bottomRows(n_items), out.topRows(n_users));
  spmm_into(g.adj_item_from_user, z.topRows(n_users), out.bottomRows(n_items));
  if (g.kind == OperatorKind::NormalizedLaplacian) {
    out -= z;
  }
}

Matrix derivative_users(const InteractionGraph& g, const Eigen::Ref<const Matrix>& item_state) {
  if (g.kind == OperatorKind::NormalizedLaplacian) {
    throw std::invalid_argument("derivative_users: laplacian kind needs the user state");
  }
  return spmm(g.adj_user_from_item, item_state);
}

Matrix derivative_items(const InteractionGraph& g, const Eigen::Ref<const Matrix>& user_state) {
  if (g.kind == OperatorKind::NormalizedLaplacian) {
    throw std::invalid_argument("derivative_items: laplacian kind needs the item state");
  }
  return spmm(g.adj_item_from_user, user_state);
}

Matrix derivative_users(const InteractionGraph& g, const Eigen::Ref<const Matrix>& item_state,
                        const Eigen::Ref<const Matrix>& user_state) {
  Matrix out = spmm(g.adj_user_from_item, item_state);
  if (g.kind == OperatorKind::NormalizedLaplacian) {
    out -= user_state;
  }
  return out;
}

Matrix derivative_items(const InteractionGraph& g, const Eigen::Ref<const Matrix>& user_state,
                        const Eigen::Ref<const Matrix>& item_state) {
  Matrix out = spmm(g.adj_item_from_user, user_state);
  if (g.kind == OperatorKind::NormalizedLaplacian) {
    out -= item_state;
  }
  return out;
}

std::pair<Matrix, Matrix> layer_combination(std::span<const EmbeddingState> states,
                                            const TimeGrid& grid) {
  grid.validate();
  const auto times = grid.times();
  if (states.size() != times.size()) {
    throw std::invalid_argument("layer_combination: state count does not match the grid");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].time != times[i]) {
      throw std::invalid_argument("layer_combination: snapshot times do not match the grid");
    }
  }
  Matrix joint = grid.weights[0] * states[0].joint;
  for (std::size_t i = 1; i < states.size(); ++i) {
    joint += grid.weights[i] * states[i].joint;
  }
  const Index n_users = states[0].user_count;
  return {joint.topRows(n_users), joint.bottomRows(joint.rows() - n_users)};
}

double score(const Matrix& user_final, const Matrix& item_final, Index user, Index item) {
  if (user < 0 || user >= user_final.rows() || item < 0 || item >= item_final.rows()) {
    throw std::invalid_argument("score: index out of range");
  }
  return user_final.row(user).dot(item_final.row(item));
}

std::pair<Matrix, Matrix> lightgcn_forward(const InteractionGraph& g,
                                           const Eigen::Ref<const Matrix>& user0,
                                           const Eigen::Ref<const Matrix>& item0, int layers) {
  if (layers < 1) {
    throw std::invalid_argument("lightgcn_forward: layer count must be >= 1");
  }
  const double w = 1.0 / (layers + 1);
  Matrix user_k = user0;
  Matrix item_k = item0;
  Matrix user_final = w * user_k;
  Matrix item_final = w * item_k;
  for (int k = 0; k < layers; ++k) {
    Matrix user_next = spmm(g.adj_user_from_item, item_k);
    Matrix item_next = spmm(g.adj_item_from_user, user_k);
    user_k = std::move(user_next);
    item_k = std::move(item_next);
    user_final += w * user_k;
    item_final += w * item_k;
  }
  return {std::move(user_final), std::move(item_final)};
}

}  // namespace odecf
