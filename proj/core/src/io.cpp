#include "odecf/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swaps");

namespace odecf {

namespace {

constexpr char kGraphMagic[4] = {'L', 'T', 'G', '1'};
constexpr char kCheckpointMagic[4] = {'L', 'T', 'C', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void write_vec(std::ofstream& out, const std::vector<T>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated file: " + path);
  return value;
}

template <typename T>
std::vector<T> read_vec(std::ifstream& in, std::size_t count, const std::string& path) {
  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw IoError("truncated file: " + path);
  return values;
}

void check_magic(std::ifstream& in, const char (&magic)[4], const std::string& path,
                 const char* what) {
  char got[4] = {};
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0) {
    throw IoError(std::string("bad magic bytes: not a ") + what + ": " + path);
  }
}

}  // namespace

void save_graph_cache(const std::string& path, const CsrMatrix& user_from_item) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write graph cache: " + path);
  out.write(kGraphMagic, 4);
  write_pod(out, user_from_item.rows);
  write_pod(out, user_from_item.cols);
  write_pod(out, user_from_item.nnz());
  write_vec(out, user_from_item.row_offsets);
  write_vec(out, user_from_item.col_indices);
  write_vec(out, user_from_item.values);
  if (!out) throw IoError("write failed: " + path);
}

CsrMatrix load_graph_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open graph cache: " + path);
  check_magic(in, kGraphMagic, path, "graph cache");
  CsrMatrix a;
  a.rows = read_pod<std::uint64_t>(in, path);
  a.cols = read_pod<std::uint64_t>(in, path);
  const auto nnz = read_pod<std::uint64_t>(in, path);
  a.row_offsets = read_vec<std::uint64_t>(in, a.rows + 1, path);
  a.col_indices = read_vec<std::uint32_t>(in, nnz, path);
  a.values = read_vec<float>(in, nnz, path);
  if (a.row_offsets.back() != nnz) {
    throw IoError("inconsistent row offsets in graph cache: " + path);
  }
  for (std::uint32_t col : a.col_indices) {
    if (col >= a.cols) throw IoError("column index out of range in graph cache: " + path);
  }
  return a;
}

std::string test_sidecar_path(const std::string& cache_path) { return cache_path + ".test"; }

void save_test_sidecar(const std::string& path,
                       const std::map<std::uint32_t, std::vector<std::uint32_t>>& test_map) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write test sidecar: " + path);
  for (const auto& [user, items] : test_map) {
    out << user;
    for (std::uint32_t item : items) out << ' ' << item;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::map<std::uint32_t, std::vector<std::uint32_t>> load_test_sidecar(const std::string& path) {
  std::uint32_t max_user = 0;
  std::uint32_t max_item = 0;
  bool any = false;
  auto edges = parse_interaction_file(path, max_user, max_item, any);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::map<std::uint32_t, std::vector<std::uint32_t>> out;
  for (const auto& [user, item] : edges) out[user].push_back(item);
  return out;
}

InteractionDataset dataset_from_cache(
    const CsrMatrix& user_from_item,
    const std::map<std::uint32_t, std::vector<std::uint32_t>>& test_map,
    const std::string& cache_path) {
  InteractionDataset ds;
  ds.num_users = static_cast<std::uint32_t>(user_from_item.rows);
  ds.num_items = static_cast<std::uint32_t>(user_from_item.cols);
  ds.train_edges.reserve(user_from_item.nnz());
  for (std::size_t row = 0; row < user_from_item.rows; ++row) {
    for (std::uint64_t idx = user_from_item.row_offsets[row];
         idx < user_from_item.row_offsets[row + 1]; ++idx) {
      ds.train_edges.emplace_back(static_cast<std::uint32_t>(row),
                                  user_from_item.col_indices[idx]);
    }
  }
  ds.rebuild_user_index();
  for (const auto& [user, items] : test_map) {
    if (user >= ds.num_users) {
      throw IoError("test sidecar user id " + std::to_string(user) +
                    " exceeds the cached graph shape: " + cache_path);
    }
    const auto& owned = ds.train_items[user];
    std::vector<std::uint32_t> kept;
    for (std::uint32_t item : items) {
      if (item >= ds.num_items) {
        throw IoError("test sidecar item id " + std::to_string(item) +
                      " exceeds the cached graph shape: " + cache_path);
      }
      if (!std::binary_search(owned.begin(), owned.end(), item)) kept.push_back(item);
    }
    if (!kept.empty()) ds.test_edges_by_user[user] = std::move(kept);
  }
  return ds;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  params.grid.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  write_pod(out, static_cast<std::uint64_t>(params.num_users()));
  write_pod(out, static_cast<std::uint64_t>(params.num_items()));
  write_pod(out, static_cast<std::uint64_t>(params.dim()));
  write_pod(out, static_cast<std::uint64_t>(params.grid.t_count()));
  write_pod(out, params.grid.terminal);
  write_vec(out, params.grid.interior);
  write_vec(out, params.grid.weights);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> user32 =
      params.user_embeddings.cast<float>();
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> item32 =
      params.item_embeddings.cast<float>();
  out.write(reinterpret_cast<const char*>(user32.data()),
            static_cast<std::streamsize>(sizeof(float) * user32.size()));
  out.write(reinterpret_cast<const char*>(item32.data()),
            static_cast<std::streamsize>(sizeof(float) * item32.size()));
  if (!out) throw IoError("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  check_magic(in, kCheckpointMagic, path, "checkpoint");
  const auto n_users = read_pod<std::uint64_t>(in, path);
  const auto n_items = read_pod<std::uint64_t>(in, path);
  const auto dim = read_pod<std::uint64_t>(in, path);
  const auto t_count = read_pod<std::uint64_t>(in, path);
  ModelParams params;
  params.grid.terminal = read_pod<double>(in, path);
  params.grid.interior = read_vec<double>(in, t_count, path);
  params.grid.weights = read_vec<double>(in, t_count + 2, path);
  const auto users32 = read_vec<float>(in, n_users * dim, path);
  const auto items32 = read_vec<float>(in, n_items * dim, path);
  params.user_embeddings.resize(static_cast<Index>(n_users), static_cast<Index>(dim));
  params.item_embeddings.resize(static_cast<Index>(n_items), static_cast<Index>(dim));
  for (std::size_t i = 0; i < users32.size(); ++i) {
    params.user_embeddings.data()[i] = static_cast<double>(users32[i]);
  }
  for (std::size_t i = 0; i < items32.size(); ++i) {
    params.item_embeddings.data()[i] = static_cast<double>(items32[i]);
  }
  params.grid.validate();
  return params;
}

}  // namespace odecf
