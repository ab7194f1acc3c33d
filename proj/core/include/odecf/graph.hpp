#pragma once

#include "odecf/dataset.hpp"
#include "odecf/types.hpp"

#include <cstdint>
#include <vector>

namespace odecf {

// Compressed sparse row matrix. Offsets/indices/values use the exact widths
// of the on-disk cache layout so save/load round-trips are byte-identical.
// Values are f32; all arithmetic on them widens to f64.
struct CsrMatrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<std::uint64_t> row_offsets;  // size rows + 1
  std::vector<std::uint32_t> col_indices;  // size nnz
  std::vector<float> values;               // size nnz

  std::uint64_t nnz() const { return values.size(); }
  bool operator==(const CsrMatrix&) const = default;
};

// Returns the transpose with rows sorted and column order preserved
// (counting sort), so values carry over exactly.
CsrMatrix transpose(const CsrMatrix& a);

// Sparse-times-dense product, f64 accumulation, one output row per CSR row in
// storage order. Safe to parallelize across rows and deterministic for any
// thread count. Throws std::invalid_argument on inner-dimension mismatch.
Matrix spmm(const CsrMatrix& a, const Eigen::Ref<const Matrix>& dense);
void spmm_into(const CsrMatrix& a, const Eigen::Ref<const Matrix>& dense, Eigen::Ref<Matrix> out);

// Which propagation operator the ODE derivative applies: the symmetrically
// normalized adjacency, or the heat-flow form (adjacency minus identity).
// Both share the same stored edge weights; the identity term is applied in
// the derivative, not in the matrix.
enum class OperatorKind { NormalizedAdjacency, NormalizedLaplacian };

// The bipartite propagation operator in both directions. Immutable after
// construction and shareable across threads.
struct InteractionGraph {
  CsrMatrix adj_user_from_item;  // num_users x num_items
  CsrMatrix adj_item_from_user;  // transpose of the above
  OperatorKind kind = OperatorKind::NormalizedAdjacency;

  Index num_users() const { return static_cast<Index>(adj_user_from_item.rows); }
  Index num_items() const { return static_cast<Index>(adj_user_from_item.cols); }
};

// Builds both propagation matrices from the training edges only. Edge (u, i)
// gets weight 1/sqrt(deg(u) * deg(i)); isolated nodes keep all-zero rows.
// Throws std::invalid_argument when the dataset has no training edges.
InteractionGraph build_graph(const InteractionDataset& ds, OperatorKind kind);

// Assembles an InteractionGraph around an already-built user-from-item
// matrix (cache load path).
InteractionGraph make_graph(CsrMatrix user_from_item, OperatorKind kind);

}  // namespace odecf
