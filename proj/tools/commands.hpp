#pragma once

#include "odecf/config.hpp"

#include <ostream>
#include <string>

namespace odecf::cli {

// Subcommand bodies, separated from flag parsing so tests can drive them
// in-process. Each throws the library error types; main() maps those to
// exit codes (config 1, io 2, divergence 3).

// Parses the splits, builds the graph, writes the "LTG1" cache and its
// test-set sidecar.
void cmd_prep(const RunConfig& cfg, std::ostream& log);

// Trains from a cached graph (or raw splits), writing the run manifest,
// per-epoch curves CSV, and a checkpoint at each evaluation improvement.
void cmd_train(const RunConfig& cfg, std::ostream& log);

// Loads a checkpoint plus a cached graph and prints the evaluation report as
// one JSON object.
void cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, std::ostream& out,
              std::ostream& log);

// Grid-runs one configuration axis (solver | K | T | fixed-vs-learnable),
// one CSV row per run; a failed run records its error and the sweep goes on.
void cmd_ablate(const RunConfig& cfg, const std::string& axis, std::ostream& log);

// Shared helpers for run setup.
void warn_config(const RunConfig& cfg, std::ostream& log);
void require_valid(const RunConfig& cfg);

}  // namespace odecf::cli
