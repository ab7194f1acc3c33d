#include "odecf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

namespace odecf {

namespace {

std::uint32_t parse_id(const std::string& token, const std::string& path, std::size_t line_no) {
  std::uint32_t value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw IoError(path + ":" + std::to_string(line_no) + ": malformed token '" + token + "'");
  }
  return value;
}

}  // namespace

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_interaction_file(
    const std::string& path, std::uint32_t& max_user, std::uint32_t& max_item, bool& any_user) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset file: " + path);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) {
      continue;  // blank line
    }
    const std::uint32_t user = parse_id(token, path, line_no);
    any_user = true;
    max_user = std::max(max_user, user);
    while (tokens >> token) {
      const std::uint32_t item = parse_id(token, path, line_no);
      max_item = std::max(max_item, item);
      edges.emplace_back(user, item);
    }
  }
  return edges;
}

void InteractionDataset::rebuild_user_index() {
  train_items.assign(num_users, {});
  for (const auto& [user, item] : train_edges) {
    train_items[user].push_back(item);
  }
}

InteractionDataset load_dataset(const std::string& train_path, const std::string& test_path) {
  std::uint32_t max_user = 0;
  std::uint32_t max_item = 0;
  bool any_train_user = false;
  bool any_test_user = false;

  auto train = parse_interaction_file(train_path, max_user, max_item, any_train_user);
  if (train.empty()) {
    throw IoError("training file contains no interactions: " + train_path);
  }
  auto test = parse_interaction_file(test_path, max_user, max_item, any_test_user);

  InteractionDataset ds;
  ds.num_users = max_user + 1;
  ds.num_items = max_item + 1;

  std::sort(train.begin(), train.end());
  train.erase(std::unique(train.begin(), train.end()), train.end());
  ds.train_edges = std::move(train);
  ds.rebuild_user_index();

  std::sort(test.begin(), test.end());
  test.erase(std::unique(test.begin(), test.end()), test.end());
  for (const auto& [user, item] : test) {
    const auto& owned = ds.train_items[user];
    if (std::binary_search(owned.begin(), owned.end(), item)) {
      continue;  // keep test sets disjoint from training
    }
    ds.test_edges_by_user[user].push_back(item);
  }
  return ds;
}

}  // namespace odecf
