#pragma once

#include "odecf/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace odecf {

// User-item interactions split into a training edge set and per-user test
// sets. Indices are dense: users in [0, num_users), items in [0, num_items).
struct InteractionDataset {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  // Sorted by (user, item), no duplicates.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> train_edges;
  // Per-user training items, sorted ascending. Size num_users.
  std::vector<std::vector<std::uint32_t>> train_items;
  // Users with nonempty test sets only; item lists sorted ascending and
  // disjoint from that user's training items.
  std::map<std::uint32_t, std::vector<std::uint32_t>> test_edges_by_user;

  std::size_t num_train_edges() const { return train_edges.size(); }

  // Rebuilds train_items from train_edges (which must be sorted/unique).
  void rebuild_user_index();
};

// Parses the "user item item ..." one-user-per-line text layout used by the
// public benchmark splits. num_users/num_items are 1 + the largest id seen in
// either file, so a test-only user enlarges the index space. Duplicate edges
// are dropped; test items that also appear in the user's training set are
// dropped so the split invariant holds.
//
// Throws IoError for missing files, malformed tokens (with file:line), or a
// training file that contributes no edges.
InteractionDataset load_dataset(const std::string& train_path, const std::string& test_path);

// Parses only one interaction file into (max_user, max_item, edges).
// Shared by load_dataset and the cache sidecar loader.
std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_interaction_file(
    const std::string& path, std::uint32_t& max_user, std::uint32_t& max_item, bool& any_user);

}  // namespace odecf
