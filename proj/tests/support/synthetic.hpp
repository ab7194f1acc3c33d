#pragma once

#include "odecf/dataset.hpp"
#include "odecf/graph.hpp"
#include "odecf/types.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline odecf::InteractionDataset make_dataset(
    std::uint32_t num_users, std::uint32_t num_items,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> train,
    std::map<std::uint32_t, std::vector<std::uint32_t>> test = {}) {
  odecf::InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  std::sort(train.begin(), train.end());
  train.erase(std::unique(train.begin(), train.end()), train.end());
  ds.train_edges = std::move(train);
  ds.rebuild_user_index();
  for (auto& [user, items] : test) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  ds.test_edges_by_user = std::move(test);
  return ds;
}

// Random bipartite dataset: every user gets between 1 and max_degree distinct
// items.
inline odecf::InteractionDataset random_dataset(std::uint32_t num_users, std::uint32_t num_items,
                                                int max_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t u = 0; u < num_users; ++u) {
    const int degree = 1 + static_cast<int>(bounded(rng, max_degree));
    for (int d = 0; d < degree; ++d) {
      edges.emplace_back(u, static_cast<std::uint32_t>(bounded(rng, num_items)));
    }
  }
  return make_dataset(num_users, num_items, std::move(edges));
}

// Block-structured dataset: users and items are split into equal blocks and
// each user interacts only inside its own block; per user, train_per items go
// to training and the rest of the block to the test set.
inline odecf::InteractionDataset planted_dataset(int blocks, int users_per_block,
                                                 int items_per_block, int train_per_user,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto num_users = static_cast<std::uint32_t>(blocks * users_per_block);
  const auto num_items = static_cast<std::uint32_t>(blocks * items_per_block);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> train;
  std::map<std::uint32_t, std::vector<std::uint32_t>> test;
  for (std::uint32_t u = 0; u < num_users; ++u) {
    const std::uint32_t block = u / users_per_block;
    std::vector<std::uint32_t> items(items_per_block);
    for (int i = 0; i < items_per_block; ++i) {
      items[i] = block * items_per_block + i;
    }
    for (std::size_t i = items.size(); i > 1; --i) {  // Fisher-Yates
      std::swap(items[i - 1], items[bounded(rng, i)]);
    }
    for (int i = 0; i < items_per_block; ++i) {
      if (i < train_per_user) {
        train.emplace_back(u, items[i]);
      } else {
        test[u].push_back(items[i]);
      }
    }
  }
  return make_dataset(num_users, num_items, std::move(train), std::move(test));
}

inline odecf::InteractionGraph graph_from_edges(
    std::uint32_t num_users, std::uint32_t num_items,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
    odecf::OperatorKind kind = odecf::OperatorKind::NormalizedAdjacency) {
  return odecf::build_graph(make_dataset(num_users, num_items, std::move(edges)), kind);
}

// Graph with no edges at all (constant dynamics); build_graph refuses these.
inline odecf::InteractionGraph empty_graph(std::uint32_t num_users, std::uint32_t num_items) {
  odecf::CsrMatrix a;
  a.rows = num_users;
  a.cols = num_items;
  a.row_offsets.assign(num_users + 1, 0);
  return odecf::make_graph(std::move(a), odecf::OperatorKind::NormalizedAdjacency);
}

inline odecf::Matrix dense_of(const odecf::CsrMatrix& a) {
  odecf::Matrix d = odecf::Matrix::Zero(static_cast<odecf::Index>(a.rows),
                                        static_cast<odecf::Index>(a.cols));
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::uint64_t idx = a.row_offsets[r]; idx < a.row_offsets[r + 1]; ++idx) {
      d(static_cast<odecf::Index>(r), a.col_indices[idx]) = static_cast<double>(a.values[idx]);
    }
  }
  return d;
}

inline void write_split_files(const odecf::InteractionDataset& ds, const std::string& train_path,
                              const std::string& test_path) {
  std::ofstream train(train_path);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    train << u;
    for (auto item : ds.train_items[u]) train << ' ' << item;
    train << '\n';
  }
  std::ofstream test(test_path);
  for (const auto& [u, items] : ds.test_edges_by_user) {
    test << u;
    for (auto item : items) test << ' ' << item;
    test << '\n';
  }
}

inline odecf::Matrix random_matrix(odecf::Index rows, odecf::Index cols, double scale,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  odecf::Matrix m(rows, cols);
  for (odecf::Index r = 0; r < rows; ++r) {
    for (odecf::Index c = 0; c < cols; ++c) {
      m(r, c) = scale * (2.0 * (static_cast<double>(rng() >> 11) * 0x1p-53) - 1.0);
    }
  }
  return m;
}

}  // namespace testsupport
