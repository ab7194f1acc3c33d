#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odecf/graph.hpp"
#include "odecf/model.hpp"
#include "support/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace odecf;
using testsupport::bounded;

TEST_CASE("degree normalization weights") {
  // edges {(u0,i0),(u0,i1),(u1,i0)}: deg(u0)=2, deg(u1)=1, deg(i0)=2, deg(i1)=1
  const auto g = testsupport::graph_from_edges(2, 2, {{0, 0}, {0, 1}, {1, 0}});
  const Matrix a = testsupport::dense_of(g.adj_user_from_item);
  CHECK(a(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(a(0, 1) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(a(1, 0) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(a(1, 1) == 0.0);
  // stored values are the f32 rounding of the f64 weight
  CHECK(a(0, 1) == static_cast<double>(static_cast<float>(1.0 / std::sqrt(2.0))));
}

TEST_CASE("single edge gets weight one") {
  const auto g = testsupport::graph_from_edges(1, 1, {{0, 0}});
  CHECK(g.adj_user_from_item.values == std::vector<float>{1.0f});
}

TEST_CASE("item-from-user matrix is the exact transpose") {
  const auto ds = testsupport::random_dataset(17, 23, 6, 99);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix a = testsupport::dense_of(g.adj_user_from_item);
  const Matrix b = testsupport::dense_of(g.adj_item_from_user);
  CHECK((a - b.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every nonzero corresponds to exactly one training edge") {
  const auto ds = testsupport::random_dataset(11, 13, 5, 7);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  REQUIRE(g.adj_user_from_item.nnz() == ds.train_edges.size());
  std::size_t idx = 0;
  for (std::size_t u = 0; u < g.adj_user_from_item.rows; ++u) {
    for (std::uint64_t p = g.adj_user_from_item.row_offsets[u];
         p < g.adj_user_from_item.row_offsets[u + 1]; ++p, ++idx) {
      CHECK(ds.train_edges[idx] ==
            std::pair<std::uint32_t, std::uint32_t>{static_cast<std::uint32_t>(u),
                                                    g.adj_user_from_item.col_indices[p]});
    }
  }
}

TEST_CASE("all weights lie in (0, 1]") {
  const auto ds = testsupport::random_dataset(20, 20, 8, 3);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  for (float v : g.adj_user_from_item.values) {
    CHECK(v > 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("zero-edge dataset is rejected") {
  InteractionDataset ds;
  ds.num_users = 2;
  ds.num_items = 2;
  ds.rebuild_user_index();
  CHECK_THROWS_AS(build_graph(ds, OperatorKind::NormalizedAdjacency), std::invalid_argument);
}

TEST_CASE("relabeling users and items permutes the weights identically") {
  const auto ds = testsupport::random_dataset(9, 12, 4, 21);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix a = testsupport::dense_of(g.adj_user_from_item);

  std::mt19937_64 rng(5);
  std::vector<std::uint32_t> user_perm(ds.num_users), item_perm(ds.num_items);
  std::iota(user_perm.begin(), user_perm.end(), 0);
  std::iota(item_perm.begin(), item_perm.end(), 0);
  for (std::size_t i = user_perm.size(); i > 1; --i) std::swap(user_perm[i - 1], user_perm[bounded(rng, i)]);
  for (std::size_t i = item_perm.size(); i > 1; --i) std::swap(item_perm[i - 1], item_perm[bounded(rng, i)]);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> relabeled;
  for (const auto& [u, i] : ds.train_edges) relabeled.emplace_back(user_perm[u], item_perm[i]);
  const auto g2 = testsupport::graph_from_edges(ds.num_users, ds.num_items, std::move(relabeled));
  const Matrix b = testsupport::dense_of(g2.adj_user_from_item);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    for (std::uint32_t i = 0; i < ds.num_items; ++i) {
      CHECK(a(u, i) == b(user_perm[u], item_perm[i]));
    }
  }
}

TEST_CASE("spmm: identity pattern leaves the dense operand unchanged") {
  CsrMatrix eye;
  eye.rows = eye.cols = 4;
  eye.row_offsets = {0, 1, 2, 3, 4};
  eye.col_indices = {0, 1, 2, 3};
  eye.values = {1.0f, 1.0f, 1.0f, 1.0f};
  const Matrix x = testsupport::random_matrix(4, 3, 1.0, 11);
  CHECK((spmm(eye, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spmm: 2x2 hand example") {
  CsrMatrix a;
  a.rows = a.cols = 2;
  a.row_offsets = {0, 2, 3};
  a.col_indices = {0, 1, 0};
  a.values = {0.5f, 0.70711f, 0.70711f};
  Matrix ones(2, 1);
  ones << 1.0, 1.0;
  const Matrix y = spmm(a, ones);
  CHECK(y(0, 0) == doctest::Approx(1.20711).epsilon(1e-6));
  CHECK(y(1, 0) == doctest::Approx(0.70711).epsilon(1e-6));
  // exact agreement with the dense oracle on the same stored values
  const Matrix oracle = testsupport::dense_of(a) * ones;
  CHECK((y - oracle).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spmm: all-zero row yields an all-zero output row") {
  CsrMatrix a;
  a.rows = 3;
  a.cols = 2;
  a.row_offsets = {0, 1, 1, 2};  // middle row empty
  a.col_indices = {0, 1};
  a.values = {2.0f, 3.0f};
  const Matrix x = testsupport::random_matrix(2, 5, 1.0, 4);
  const Matrix y = spmm(a, x);
  CHECK(y.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spmm matches the dense oracle on random graphs") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const auto ds = testsupport::random_dataset(5 + seed * 9, 50 - seed * 7, 10, seed);
    const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
    const Matrix x = testsupport::random_matrix(g.num_items(), 8, 2.0, seed + 100);
    const Matrix got = spmm(g.adj_user_from_item, x);
    const Matrix want = testsupport::dense_of(g.adj_user_from_item) * x;
    const double scale = want.cwiseAbs().maxCoeff();
    CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale));
  }
}

TEST_CASE("spmm rejects mismatched shapes") {
  const auto g = testsupport::graph_from_edges(2, 3, {{0, 0}, {1, 2}});
  const Matrix wrong = Matrix::Zero(2, 4);  // needs 3 rows
  CHECK_THROWS_AS(spmm(g.adj_user_from_item, wrong), std::invalid_argument);
}

TEST_CASE("bipartite joint operator is symmetric") {
  const auto ds = testsupport::random_dataset(8, 6, 4, 17);
  const auto g = build_graph(ds, OperatorKind::NormalizedAdjacency);
  const Matrix x = testsupport::random_matrix(14, 3, 1.0, 1);
  const Matrix y = testsupport::random_matrix(14, 3, 1.0, 2);
  Matrix lx, ly;
  joint_derivative(g, x, lx);
  joint_derivative(g, y, ly);
  const double lhs = (lx.array() * y.array()).sum();
  const double rhs = (x.array() * ly.array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
