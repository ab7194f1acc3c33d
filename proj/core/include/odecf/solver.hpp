#pragma once

#include "odecf/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odecf {

enum class SolverKind { Euler, RungeKutta4, AdamsMoulton, Dopri };

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);  // throws ConfigError

struct SolverConfig {
  SolverKind kind = SolverKind::RungeKutta4;
  double step = 0.5;       // fixed-step kinds; substeps per segment = ceil(len/step)
  double rtol = 1e-7;      // dopri
  double atol = 1e-9;      // dopri
  bool residual = true;    // keep the segment start state in the output
  int corrector_iters = 10;    // adams-moulton fixed-point iterations
  double corrector_tol = 1e-9; // adams-moulton early-stop threshold

  // Kind-appropriate default step sizes: euler 0.1, rk4 0.5.
  static SolverConfig for_kind(SolverKind kind);

  void validate() const;  // throws std::invalid_argument
};

// Record of the forward computation as a linear op graph over joint-state
// nodes. The dynamics are linear and parameter-free, so the reverse pass
// needs only this structure (coefficients and topology), never stage values.
// Node 0 is the initial joint state.
struct Tape {
  struct Term {
    std::int32_t node;
    double coeff;
  };
  struct Op {
    enum class Kind : std::uint8_t { LinComb, Apply };
    Kind kind;
    std::int32_t out;
    std::int32_t in = -1;         // Apply: out = operator * node(in)
    std::int32_t first_term = 0;  // LinComb: out = sum coeff * node, terms in [first_term, first_term + n_terms)
    std::int32_t n_terms = 0;
  };

  std::int32_t num_nodes = 1;
  std::vector<Op> ops;
  std::vector<Term> terms;

  std::int32_t apply(std::int32_t in);
  std::int32_t lin_comb(std::initializer_list<Term> ts);
  std::int32_t lin_comb(const std::vector<Term>& ts);
};

// Accumulates adjoints through the tape in reverse, seeding the given nodes.
// The propagation operator is symmetric by construction (the item-from-user
// matrix is the exact transpose), so the transposed Apply reuses
// joint_derivative. Returns the adjoint of node 0.
Matrix tape_backward(const Tape& tape, const InteractionGraph& g,
                     std::vector<std::pair<std::int32_t, Matrix>> seeds);

// States recorded at the grid times {0, t_1, ..., t_T, terminal}, plus the
// bookkeeping the training backward pass consumes.
struct Trajectory {
  std::vector<EmbeddingState> snapshots;
  std::int64_t step_count = 0;  // derivative-evaluation tally

  std::optional<Tape> tape;                 // recorded when requested
  std::vector<std::int32_t> snapshot_nodes; // tape node per snapshot
  // d(snapshot_i)/d(t_i) for interior snapshots i = 1..T: the exact tangent
  // of the discrete segment map with respect to its own end time.
  std::vector<Matrix> time_tangents;
  bool has_tape() const { return tape.has_value(); }
  bool has_time_tangents() const { return !time_tangents.empty(); }
};

struct IntegrateOptions {
  bool record_tape = false;
  bool time_tangents = false;
};

// Advances the joint state from t_from to t_to with the configured scheme.
// All stages step the concatenated (user, item) state jointly. Fixed-step
// kinds split the segment into ceil((t_to - t_from)/step) equal substeps;
// dopri adapts and clips its last substep onto t_to. With residual=false the
// output is the integral increment only (integrated end state minus start).
// Throws DivergenceError on non-finite states or dopri step underflow.
EmbeddingState integrate_segment(const InteractionGraph& g, const EmbeddingState& start,
                                 double t_from, double t_to, const SolverConfig& cfg);

// Chains integrate_segment across consecutive grid times and records the
// T + 2 snapshots. Options add the reverse-mode tape and the per-interior-
// snapshot time tangents.
Trajectory integrate_grid(const InteractionGraph& g, const ModelParams& params,
                          const SolverConfig& cfg, const IntegrateOptions& opts = {});

// Dormand-Prince 5(4) controller pieces, exposed for direct testing.
// error_norm: RMS over components of err / (atol + rtol * max(|y|, |y_new|)).
double dopri_error_norm(const Matrix& err, const Matrix& y, const Matrix& y_new,
                        double rtol, double atol);

struct StepControl {
  bool accept = false;
  double next_h = 0.0;
};

// Accept when the norm is <= 1; next h scales by clamp(0.9 * norm^(-1/5),
// 0.2, 10), with a zero norm taking the full growth factor.
StepControl dopri_step_control(double error_norm, double h);

}  // namespace odecf
