#include "odecf/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace odecf {

CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t;
  t.rows = a.cols;
  t.cols = a.rows;
  t.row_offsets.assign(t.rows + 1, 0);
  t.col_indices.resize(a.nnz());
  t.values.resize(a.nnz());

  for (std::uint32_t col : a.col_indices) {
    ++t.row_offsets[col + 1];
  }
  for (std::size_t r = 0; r < t.rows; ++r) {
    t.row_offsets[r + 1] += t.row_offsets[r];
  }
  std::vector<std::uint64_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
  for (std::size_t row = 0; row < a.rows; ++row) {
    for (std::uint64_t idx = a.row_offsets[row]; idx < a.row_offsets[row + 1]; ++idx) {
      const std::uint32_t col = a.col_indices[idx];
      const std::uint64_t slot = cursor[col]++;
      t.col_indices[slot] = static_cast<std::uint32_t>(row);
      t.values[slot] = a.values[idx];
    }
  }
  return t;
}

void spmm_into(const CsrMatrix& a, const Eigen::Ref<const Matrix>& dense, Eigen::Ref<Matrix> out) {
  if (static_cast<std::uint64_t>(dense.rows()) != a.cols) {
    throw std::invalid_argument("spmm: inner dimensions disagree");
  }
  if (static_cast<std::uint64_t>(out.rows()) != a.rows || out.cols() != dense.cols()) {
    throw std::invalid_argument("spmm: output shape mismatch");
  }
  const auto rows = static_cast<Index>(a.rows);
#pragma omp parallel for schedule(static)
  for (Index row = 0; row < rows; ++row) {
    out.row(row).setZero();
    const std::uint64_t begin = a.row_offsets[row];
    const std::uint64_t end = a.row_offsets[row + 1];
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      out.row(row) += static_cast<double>(a.values[idx]) * dense.row(a.col_indices[idx]);
    }
  }
}

Matrix spmm(const CsrMatrix& a, const Eigen::Ref<const Matrix>& dense) {
  Matrix out(static_cast<Index>(a.rows), dense.cols());
  spmm_into(a, dense, out);
  return out;
}

InteractionGraph make_graph(CsrMatrix user_from_item, OperatorKind kind) {
  InteractionGraph g;
  g.adj_item_from_user = transpose(user_from_item);
  g.adj_user_from_item = std::move(user_from_item);
  g.kind = kind;
  return g;
}

InteractionGraph build_graph(const InteractionDataset& ds, OperatorKind kind) {
  if (ds.train_edges.empty()) {
    throw std::invalid_argument("build_graph: dataset has no training edges");
  }
  std::vector<std::uint64_t> user_degree(ds.num_users, 0);
  std::vector<std::uint64_t> item_degree(ds.num_items, 0);
  for (const auto& [user, item] : ds.train_edges) {
    ++user_degree[user];
    ++item_degree[item];
  }

  CsrMatrix a;
  a.rows = ds.num_users;
  a.cols = ds.num_items;
  a.row_offsets.assign(a.rows + 1, 0);
  a.col_indices.reserve(ds.train_edges.size());
  a.values.reserve(ds.train_edges.size());
  // train_edges is sorted by (user, item): CSR assembly is a single sweep.
  for (const auto& [user, item] : ds.train_edges) {
    a.row_offsets[user + 1] += 1;
    a.col_indices.push_back(item);
    const double w = 1.0 / std::sqrt(static_cast<double>(user_degree[user]) *
                                     static_cast<double>(item_degree[item]));
    a.values.push_back(static_cast<float>(w));
  }
  for (std::size_t r = 0; r < a.rows; ++r) {
    a.row_offsets[r + 1] += a.row_offsets[r];
  }
  return make_graph(std::move(a), kind);
}

}  // namespace odecf
