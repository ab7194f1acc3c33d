#pragma once

#include "odecf/dataset.hpp"
#include "odecf/graph.hpp"
#include "odecf/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace odecf {

// Graph cache, magic "LTG1": little-endian u64 N, M, nnz, then the CSR arrays
// of the user-from-item matrix (row offsets u64, column indices u32, values
// f32). The transpose is rebuilt on load.
void save_graph_cache(const std::string& path, const CsrMatrix& user_from_item);
CsrMatrix load_graph_cache(const std::string& path);

// Test-set sidecar next to a graph cache (path + ".test"): the same
// one-user-per-line text layout as the input splits, normalized (sorted,
// deduplicated).
std::string test_sidecar_path(const std::string& cache_path);
void save_test_sidecar(const std::string& path,
                       const std::map<std::uint32_t, std::vector<std::uint32_t>>& test_map);
std::map<std::uint32_t, std::vector<std::uint32_t>> load_test_sidecar(const std::string& path);

// Reassembles the dataset view an evaluation needs from a cached graph and
// its sidecar: training items come from the matrix pattern (every nonzero is
// exactly one training edge). Validates test ids against the cached shape.
InteractionDataset dataset_from_cache(const CsrMatrix& user_from_item,
                                      const std::map<std::uint32_t, std::vector<std::uint32_t>>& test_map,
                                      const std::string& cache_path);

// Model checkpoint, magic "LTC1": little-endian u64 N, M, D, T; f64 terminal
// time; f64 interior times; f64 weights (T + 2); then f32 row-major user and
// item embeddings.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace odecf
