#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odecf/model.hpp"
#include "support/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace odecf;

TEST_CASE("init_embeddings is deterministic per seed") {
  const auto [u1, p1] = init_embeddings(5, 7, 4, 42);
  const auto [u2, p2] = init_embeddings(5, 7, 4, 42);
  CHECK((u1 - u2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  const auto [u3, p3] = init_embeddings(5, 7, 4, 43);
  CHECK((u1 - u3).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("init_embeddings matches the normal(0, 0.1) moments") {
  const auto [users, items] = init_embeddings(1000, 1, 1000, 7);
  const double n = static_cast<double>(users.size());
  const double mean = users.sum() / n;
  const double var = (users.array() - mean).square().sum() / (n - 1);
  CHECK(mean > -0.001);
  CHECK(mean < 0.001);
  CHECK(std::sqrt(var) > 0.099);
  CHECK(std::sqrt(var) < 0.101);
  (void)items;
}

TEST_CASE("init_embeddings rejects a zero dimension") {
  CHECK_THROWS_AS(init_embeddings(2, 2, 0, 1), std::invalid_argument);
}

TEST_CASE("derivative is zero on the zero state") {
  const auto g = testsupport::graph_from_edges(2, 2, {{0, 0}, {1, 1}});
  const Matrix zero = Matrix::Zero(2, 3);
  CHECK(derivative_users(g, zero).cwiseAbs().maxCoeff() == 0.0);
  CHECK(derivative_items(g, zero).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("derivative on a weight-one single edge copies the co-state row") {
  const auto g = testsupport::graph_from_edges(1, 1, {{0, 0}});
  Matrix p(1, 2);
  p << 2.0, 4.0;
  const Matrix f = derivative_users(g, p);
  CHECK(f(0, 0) == 2.0);
  CHECK(f(0, 1) == 4.0);
}

TEST_CASE("derivative is linear in its input") {
  const auto ds = testsupport::random_dataset(6, 5, 3, 11);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix p = testsupport::random_matrix(5, 3, 1.0, 2);
  const Matrix scaled = derivative_users(g, Matrix(3.5 * p));
  const Matrix direct = 3.5 * derivative_users(g, p);
  CHECK((scaled - direct).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("laplacian kind subtracts the same-side state") {
  const auto ds = testsupport::random_dataset(4, 4, 3, 5);
  const auto g = build_graph(ds, OperatorKind::NormalizedLaplacian);
  const Matrix users = testsupport::random_matrix(4, 2, 1.0, 3);
  const Matrix items = testsupport::random_matrix(4, 2, 1.0, 4);

  const Matrix f = derivative_users(g, items, users);
  const Matrix expect = spmm(g.adj_user_from_item, items) - users;
  CHECK((f - expect).cwiseAbs().maxCoeff() == 0.0);

  Matrix z(8, 2), dz;
  z.topRows(4) = users;
  z.bottomRows(4) = items;
  joint_derivative(g, z, dz);
  CHECK((dz.topRows(4) - expect).cwiseAbs().maxCoeff() == 0.0);

  // the two-argument form refuses the laplacian kind
  CHECK_THROWS_AS(derivative_users(g, items), std::invalid_argument);
}

TEST_CASE("layer_combination: two equal weights average the endpoints") {
  TimeGrid grid;
  grid.terminal = 2.0;
  grid.weights = {0.5, 0.5};
  Matrix a(1, 1), b(1, 1), zero(0, 1);
  a << 1.0;
  b << 3.0;
  std::vector<EmbeddingState> states;
  states.push_back(EmbeddingState::from_parts(a, zero, 0.0));
  states.push_back(EmbeddingState::from_parts(b, zero, 2.0));
  const auto [eu, ep] = layer_combination(states, grid);
  CHECK(eu(0, 0) == 2.0);
}

TEST_CASE("layer_combination: identical states with unit weight sum reproduce the state") {
  TimeGrid grid = TimeGrid::uniform(3.0, 1);
  const Matrix x = testsupport::random_matrix(2, 2, 1.0, 9);
  const Matrix y = testsupport::random_matrix(3, 2, 1.0, 10);
  std::vector<EmbeddingState> states;
  for (double t : grid.times()) states.push_back(EmbeddingState::from_parts(x, y, t));
  const auto [eu, ep] = layer_combination(states, grid);
  CHECK((eu - x).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((ep - y).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("layer_combination: equal thirds") {
  TimeGrid grid;
  grid.terminal = 2.0;
  grid.interior = {1.0};
  grid.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  Matrix zero(0, 1);
  std::vector<EmbeddingState> states;
  for (int i = 0; i < 3; ++i) {
    Matrix m(1, 1);
    m << 3.0 * i;
    states.push_back(EmbeddingState::from_parts(m, zero, static_cast<double>(i)));
  }
  const auto [eu, ep] = layer_combination(states, grid);
  CHECK(eu(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("layer_combination: one-hot weights return exactly that snapshot") {
  TimeGrid grid = TimeGrid::uniform(4.0, 2);
  std::vector<EmbeddingState> states;
  for (double t : grid.times()) {
    states.push_back(EmbeddingState::from_parts(testsupport::random_matrix(3, 2, 1.0, 50 + static_cast<int>(t * 10)),
                                                testsupport::random_matrix(2, 2, 1.0, 80 + static_cast<int>(t * 10)), t));
  }
  for (std::size_t hot = 0; hot < states.size(); ++hot) {
    grid.weights.assign(states.size(), 0.0);
    grid.weights[hot] = 1.0;
    const auto [eu, ep] = layer_combination(states, grid);
    CHECK((eu - states[hot].users()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ep - states[hot].items()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("layer_combination rejects a state-count mismatch") {
  TimeGrid grid = TimeGrid::uniform(2.0, 1);
  std::vector<EmbeddingState> states(2, EmbeddingState::zeros(1, 1, 1));
  states[1].time = 2.0;
  CHECK_THROWS_AS(layer_combination(states, grid), std::invalid_argument);
}

TEST_CASE("score is the row dot product") {
  Matrix eu(1, 2), ep(2, 2);
  eu << 1.0, 2.0;
  ep << 3.0, 4.0, -1.0, 0.5;
  CHECK(score(eu, ep, 0, 0) == 11.0);
  Matrix orth_u(1, 2), orth_p(1, 2);
  orth_u << 1.0, 0.0;
  orth_p << 0.0, 5.0;
  CHECK(score(orth_u, orth_p, 0, 0) == 0.0);
  CHECK_THROWS_AS(score(eu, ep, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(score(eu, ep, 0, 2), std::invalid_argument);
}

TEST_CASE("score is invariant under appending zero columns") {
  Matrix eu(1, 2), ep(1, 2);
  eu << 1.5, -2.0;
  ep << 0.25, 3.0;
  Matrix eu_wide = Matrix::Zero(1, 4), ep_wide = Matrix::Zero(1, 4);
  eu_wide.leftCols(2) = eu;
  ep_wide.leftCols(2) = ep;
  CHECK(score(eu, ep, 0, 0) == score(eu_wide, ep_wide, 0, 0));
}

TEST_CASE("lightgcn_forward: one layer on a weight-one edge") {
  const auto g = testsupport::graph_from_edges(1, 1, {{0, 0}});
  Matrix u0(1, 1), p0(1, 1);
  u0 << 1.0;
  p0 << 2.0;
  const auto [eu, ep] = lightgcn_forward(g, u0, p0, 1);
  CHECK(eu(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(ep(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("lightgcn_forward: zero initial embeddings stay zero") {
  const auto ds = testsupport::random_dataset(4, 5, 3, 8);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const auto [eu, ep] = lightgcn_forward(g, Matrix::Zero(4, 3), Matrix::Zero(5, 3), 3);
  CHECK(eu.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ep.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lightgcn_forward is equivariant under simultaneous relabeling") {
  const auto ds = testsupport::random_dataset(6, 7, 3, 13);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix u0 = testsupport::random_matrix(6, 2, 1.0, 21);
  const Matrix p0 = testsupport::random_matrix(7, 2, 1.0, 22);
  const auto [eu, ep] = lightgcn_forward(g, u0, p0, 2);

  std::mt19937_64 rng(3);
  std::vector<std::uint32_t> uperm(6), iperm(7);
  std::iota(uperm.begin(), uperm.end(), 0);
  std::iota(iperm.begin(), iperm.end(), 0);
  for (std::size_t i = uperm.size(); i > 1; --i) std::swap(uperm[i - 1], uperm[testsupport::bounded(rng, i)]);
  for (std::size_t i = iperm.size(); i > 1; --i) std::swap(iperm[i - 1], iperm[testsupport::bounded(rng, i)]);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> relabeled;
  for (const auto& [u, i] : ds.train_edges) relabeled.emplace_back(uperm[u], iperm[i]);
  const auto g2 = testsupport::graph_from_edges(6, 7, std::move(relabeled));
  Matrix u0p(6, 2), p0p(7, 2);
  for (int u = 0; u < 6; ++u) u0p.row(uperm[u]) = u0.row(u);
  for (int i = 0; i < 7; ++i) p0p.row(iperm[i]) = p0.row(i);
  const auto [eu2, ep2] = lightgcn_forward(g2, u0p, p0p, 2);
  for (int u = 0; u < 6; ++u) {
    CHECK((eu2.row(uperm[u]) - eu.row(u)).cwiseAbs().maxCoeff() <= 1e-14);
  }
  for (int i = 0; i < 7; ++i) {
    CHECK((ep2.row(iperm[i]) - ep.row(i)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("time grid validation") {
  CHECK_THROWS_AS(TimeGrid::uniform(-1.0, 2).validate(), std::invalid_argument);
  TimeGrid bad = TimeGrid::uniform(4.0, 2);
  bad.interior = {2.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TimeGrid wrong_weights = TimeGrid::uniform(4.0, 2);
  wrong_weights.weights.pop_back();
  CHECK_THROWS_AS(wrong_weights.validate(), std::invalid_argument);
  const TimeGrid good = TimeGrid::uniform(4.0, 3);
  CHECK(good.times() == std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("persistable rounds embeddings through f32") {
  ModelParams params;
  std::tie(params.user_embeddings, params.item_embeddings) = init_embeddings(3, 3, 2, 1);
  params.grid = TimeGrid::uniform(2.0, 1);
  const ModelParams p = params.persistable();
  for (Index i = 0; i < p.user_embeddings.size(); ++i) {
    const double v = p.user_embeddings.data()[i];
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
}
