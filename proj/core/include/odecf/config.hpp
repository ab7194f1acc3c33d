#pragma once

#include "odecf/graph.hpp"
#include "odecf/model.hpp"
#include "odecf/solver.hpp"
#include "odecf/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace odecf {

// Flat run configuration: the union of solver, training, grid, dataset and
// output settings. Serializes to diff-friendly key=value text; a run's
// manifest is exactly this serialization, so manifests replay as configs.
struct RunConfig {
  std::string train_path;
  std::string test_path;
  std::string cache_path;
  std::string out_dir;

  std::string solver = "rk4";
  double step = 0.0;  // 0 picks the solver-specific default
  double rtol = 1e-7;
  double atol = 1e-9;
  bool residual = true;
  int corrector_iters = 10;
  double corrector_tol = 1e-9;

  std::string operator_kind = "adj";  // adj | laplacian
  int dim = 64;
  double k_time = 4.0;
  int t_count = 3;
  bool fixed_time = false;            // freeze t_i at the uniform grid
  std::vector<double> weights;        // optional override, size t_count + 2

  double lr = 1e-4;
  double lr_time = 1e-6;
  double lambda = 1e-4;
  int batch = 2048;
  int epochs = 1000;
  std::uint64_t seed = 0;
  int topk = 20;
  int eval_every = 10;
  int patience = 10;
  double time_margin = 1e-3;
  bool full_batch = false;
  bool parallel = false;  // ablate: run the sweep's trainings concurrently

  // Parses a key=value file ('#' comments, blank lines allowed). Unknown keys
  // and unparsable values are collected and reported together.
  static RunConfig from_file(const std::string& path);  // throws IoError/ConfigError
  void set_key(const std::string& key, const std::string& value);  // throws ConfigError

  // Canonical serialization: fixed key order, shortest round-trip doubles.
  std::string serialize() const;

  // All validation failures at once (empty means valid).
  std::vector<std::string> validation_errors() const;
  // Out-of-paper-range settings worth flagging (K outside {2,3,4}, ...).
  std::vector<std::string> validation_warnings() const;

  SolverConfig solver_config() const;
  TrainConfig train_config() const;
  TimeGrid time_grid() const;
  OperatorKind graph_operator() const;
};

}  // namespace odecf
