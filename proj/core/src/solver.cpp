#include "odecf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace odecf {

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Euler: return "euler";
    case SolverKind::RungeKutta4: return "rk4";
    case SolverKind::AdamsMoulton: return "adams-moulton";
    case SolverKind::Dopri: return "dopri";
  }
  return "unknown";
}

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "euler") return SolverKind::Euler;
  if (name == "rk4") return SolverKind::RungeKutta4;
  if (name == "adams-moulton" || name == "adams_moulton") return SolverKind::AdamsMoulton;
  if (name == "dopri") return SolverKind::Dopri;
  throw ConfigError("unknown solver kind: '" + name + "' (expected euler|rk4|adams-moulton|dopri)");
}

SolverConfig SolverConfig::for_kind(SolverKind kind) {
  SolverConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case SolverKind::Euler: cfg.step = 0.1; break;
    case SolverKind::RungeKutta4: cfg.step = 0.5; break;
    case SolverKind::AdamsMoulton: cfg.step = 0.25; break;
    case SolverKind::Dopri: cfg.step = 0.5; break;
  }
  return cfg;
}

void SolverConfig::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("solver config: step must be positive");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("solver config: tolerances must be positive");
  if (corrector_iters < 1) throw std::invalid_argument("solver config: corrector_iters must be >= 1");
  if (!(corrector_tol > 0.0)) throw std::invalid_argument("solver config: corrector_tol must be positive");
}

std::int32_t Tape::apply(std::int32_t in) {
  if (in < 0) throw std::logic_error("tape: apply on unrecorded node");
  Op op;
  op.kind = Op::Kind::Apply;
  op.in = in;
  op.out = num_nodes++;
  ops.push_back(op);
  return op.out;
}

std::int32_t Tape::lin_comb(const std::vector<Term>& ts) {
  Op op;
  op.kind = Op::Kind::LinComb;
  op.first_term = static_cast<std::int32_t>(terms.size());
  op.n_terms = static_cast<std::int32_t>(ts.size());
  for (const Term& t : ts) {
    if (t.node < 0) throw std::logic_error("tape: lin_comb on unrecorded node");
    terms.push_back(t);
  }
  op.out = num_nodes++;
  ops.push_back(op);
  return op.out;
}

std::int32_t Tape::lin_comb(std::initializer_list<Term> ts) {
  return lin_comb(std::vector<Term>(ts));
}

Matrix tape_backward(const Tape& tape, const InteractionGraph& g,
                     std::vector<std::pair<std::int32_t, Matrix>> seeds) {
  if (seeds.empty()) throw std::invalid_argument("tape_backward: no seeds");
  const Index rows = seeds.front().second.rows();
  const Index cols = seeds.front().second.cols();

  std::unordered_map<std::int32_t, Matrix> adjoint;
  auto add_to = [&](std::int32_t node, const Matrix& m) {
    auto [it, inserted] = adjoint.try_emplace(node, m);
    if (!inserted) it->second += m;
  };
  for (auto& [node, m] : seeds) add_to(node, m);

  Matrix scratch;
  for (auto op = tape.ops.rbegin(); op != tape.ops.rend(); ++op) {
    auto it = adjoint.find(op->out);
    if (it == adjoint.end()) continue;  // node never reached the loss
    Matrix a = std::move(it->second);
    adjoint.erase(it);
    if (op->kind == Tape::Op::Kind::Apply) {
      // The joint operator is symmetric (the two CSR halves are exact
      // transposes), so the transposed apply is the same apply.
      joint_derivative(g, a, scratch);
      add_to(op->in, scratch);
    } else {
      for (std::int32_t i = 0; i < op->n_terms; ++i) {
        const Tape::Term& t = tape.terms[op->first_term + i];
        add_to(t.node, t.coeff * a);
      }
    }
  }
  auto it = adjoint.find(0);
  if (it == adjoint.end()) return Matrix::Zero(rows, cols);
  return std::move(it->second);
}

double dopri_error_norm(const Matrix& err, const Matrix& y, const Matrix& y_new,
                        double rtol, double atol) {
  const auto scale = (atol + rtol * y.array().abs().max(y_new.array().abs()));
  return std::sqrt((err.array() / scale).square().mean());
}

StepControl dopri_step_control(double error_norm, double h) {
  StepControl ctrl;
  ctrl.accept = error_norm <= 1.0;
  const double factor =
      error_norm == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(error_norm, -0.2), 0.2, 10.0);
  ctrl.next_h = h * factor;
  return ctrl;
}

namespace {

// A joint-state value paired with its tape node (-1 when not recording).
struct NV {
  Matrix v;
  std::int32_t node = -1;
};

struct SegmentOut {
  Matrix z;
  std::int32_t node = -1;
  Matrix tangent;  // d z / d t_to; empty when not requested
};

class Stepper {
 public:
  Stepper(const InteractionGraph& g, Tape* tape) : g_(g), tape_(tape) {}

  std::int64_t evals() const { return evals_; }

  NV apply(const NV& x) {
    NV out;
    joint_derivative(g_, x.v, out.v);
    ++evals_;
    if (tape_) out.node = tape_->apply(x.node);
    return out;
  }

  // Tangent-side operator application: neither taped nor tallied.
  Matrix deriv(const Matrix& x) {
    Matrix out;
    joint_derivative(g_, x, out);
    return out;
  }

  NV lincomb(std::initializer_list<std::pair<const NV*, double>> ts) {
    NV out;
    bool first = true;
    for (const auto& [p, c] : ts) {
      if (first) {
        out.v = c * p->v;
        first = false;
      } else {
        out.v += c * p->v;
      }
    }
    if (tape_) {
      std::vector<Tape::Term> terms;
      terms.reserve(ts.size());
      for (const auto& [p, c] : ts) terms.push_back({p->node, c});
      out.node = tape_->lin_comb(terms);
    }
    return out;
  }

 private:
  const InteractionGraph& g_;
  Tape* tape_;
  std::int64_t evals_ = 0;
};

void check_finite(const Matrix& z, SolverKind kind, int substep) {
  if (!z.allFinite()) {
    throw DivergenceError("solver " + to_string(kind) + " diverged at substep " +
                          std::to_string(substep));
  }
}

int substep_count(double length, double step) {
  return std::max(1, static_cast<int>(std::ceil(length / step - 1e-9)));
}

// One Euler substep. delta = dh/d(t_to); k1_out receives the start-state
// derivative for multistep reuse.
void euler_substep(Stepper& st, NV& z, Matrix* v, double h, double delta, NV* k1_out) {
  NV k1 = st.apply(z);
  if (v) {
    Matrix kd1 = st.deriv(*v);
    *v += h * kd1 + delta * k1.v;
  }
  z = st.lincomb({{&z, 1.0}, {&k1, h}});
  if (k1_out) *k1_out = std::move(k1);
}

// One classical RK4 substep with exact product-rule tangent propagation.
void rk4_substep(Stepper& st, NV& z, Matrix* v, double h, double delta, NV* k1_out,
                 Matrix* kd1_out) {
  NV k1 = st.apply(z);
  NV y2 = st.lincomb({{&z, 1.0}, {&k1, h / 2}});
  NV k2 = st.apply(y2);
  NV y3 = st.lincomb({{&z, 1.0}, {&k2, h / 2}});
  NV k3 = st.apply(y3);
  NV y4 = st.lincomb({{&z, 1.0}, {&k3, h}});
  NV k4 = st.apply(y4);
  if (v) {
    Matrix kd1 = st.deriv(*v);
    Matrix yd = *v + (delta / 2) * k1.v + (h / 2) * kd1;
    Matrix kd2 = st.deriv(yd);
    yd = *v + (delta / 2) * k2.v + (h / 2) * kd2;
    Matrix kd3 = st.deriv(yd);
    yd = *v + delta * k3.v + h * kd3;
    Matrix kd4 = st.deriv(yd);
    *v += (delta / 6) * (k1.v + 2 * k2.v + 2 * k3.v + k4.v) +
          (h / 6) * (kd1 + 2 * kd2 + 2 * kd3 + kd4);
    if (kd1_out) *kd1_out = std::move(kd1);
  }
  z = st.lincomb({{&z, 1.0}, {&k1, h / 6}, {&k2, h / 3}, {&k3, h / 3}, {&k4, h / 6}});
  if (k1_out) *k1_out = std::move(k1);
}

void fixed_step_segment(Stepper& st, NV& z, Matrix* v, double length, const SolverConfig& cfg) {
  const int n = substep_count(length, cfg.step);
  const double h = length / n;
  const double delta = 1.0 / n;  // every substep stretches with the end time

  if (cfg.kind == SolverKind::Euler) {
    for (int m = 0; m < n; ++m) {
      euler_substep(st, z, v, h, delta, nullptr);
      check_finite(z.v, cfg.kind, m);
    }
    return;
  }
  if (cfg.kind == SolverKind::RungeKutta4) {
    for (int m = 0; m < n; ++m) {
      rk4_substep(st, z, v, h, delta, nullptr, nullptr);
      check_finite(z.v, cfg.kind, m);
    }
    return;
  }

  // Adams-Moulton: 2-step Adams-Bashforth predictor, Eq.-style 3-step
  // implicit corrector via fixed-point iteration, RK4 warm start for the
  // first three substeps. History holds the derivative at the last three
  // accepted states (and its tangent).
  std::deque<NV> hist;        // newest at back
  std::deque<Matrix> hist_d;  // tangents of the history entries
  for (int m = 0; m < n; ++m) {
    if (m < 3) {
      NV k1;
      Matrix kd1;
      if (v) {
        rk4_substep(st, z, v, h, delta, &k1, &kd1);
      } else {
        rk4_substep(st, z, nullptr, h, delta, &k1, nullptr);
      }
      hist.push_back(std::move(k1));  // derivative at the substep start state
      if (v) hist_d.push_back(std::move(kd1));
      check_finite(z.v, cfg.kind, m);
      continue;
    }
    // Derivative at the current state (PECE evaluation of the previous step,
    // or the warm-start boundary).
    NV f_cur = st.apply(z);
    Matrix fd_cur = v ? st.deriv(*v) : Matrix();
    const NV& f_m1 = hist.back();
    const NV& f_m2 = hist[hist.size() - 2];

    // Predictor: z + h*(3/2 f_cur - 1/2 f_m1).
    NV y = st.lincomb({{&z, 1.0}, {&f_cur, 1.5 * h}, {&f_m1, -0.5 * h}});
    Matrix yd;
    NV base = st.lincomb(
        {{&z, 1.0}, {&f_cur, 19.0 * h / 24}, {&f_m1, -5.0 * h / 24}, {&f_m2, h / 24}});
    Matrix based;
    if (v) {
      const Matrix& fd_m1 = hist_d.back();
      const Matrix& fd_m2 = hist_d[hist_d.size() - 2];
      yd = *v + (1.5 * delta) * f_cur.v + (-0.5 * delta) * f_m1.v + (1.5 * h) * fd_cur +
           (-0.5 * h) * fd_m1;
      based = *v + (19.0 * delta / 24) * f_cur.v + (-5.0 * delta / 24) * f_m1.v +
              (delta / 24) * f_m2.v + (19.0 * h / 24) * fd_cur + (-5.0 * h / 24) * fd_m1 +
              (h / 24) * fd_m2;
    }
    for (int it = 0; it < cfg.corrector_iters; ++it) {
      NV fy = st.apply(y);
      NV y_next = st.lincomb({{&base, 1.0}, {&fy, 9.0 * h / 24}});
      if (v) {
        Matrix fyd = st.deriv(yd);
        yd = based + (9.0 * delta / 24) * fy.v + (9.0 * h / 24) * fyd;
      }
      const double change = (y_next.v - y.v).cwiseAbs().maxCoeff();
      y = std::move(y_next);
      if (change <= cfg.corrector_tol) break;
    }
    z = std::move(y);
    if (v) *v = std::move(yd);
    check_finite(z.v, cfg.kind, m);
    hist.push_back(std::move(f_cur));
    if (v) hist_d.push_back(std::move(fd_cur));
    if (hist.size() > 2) hist.pop_front();
    if (hist_d.size() > 2) hist_d.pop_front();
  }
}

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                 kB6 = 11.0 / 84;
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

void dopri_segment(Stepper& st, NV& z, Matrix* v, double t_from, double t_to,
                   const SolverConfig& cfg) {
  const double length = t_to - t_from;
  double t = t_from;
  double h = length / 10.0;
  NV k1 = st.apply(z);  // FSAL seed
  int substep = 0;
  constexpr int kMaxSubsteps = 10'000'000;

  while (true) {
    const double remaining = t_to - t;
    if (remaining <= 1e-12 * std::max(1.0, std::abs(t_to))) break;
    if (substep++ > kMaxSubsteps) {
      throw DivergenceError("dopri exceeded the substep budget");
    }
    bool clipped = false;
    if (h >= remaining) {
      h = remaining;
      clipped = true;
    }

    NV y2 = st.lincomb({{&z, 1.0}, {&k1, h * kA21}});
    NV k2 = st.apply(y2);
    NV y3 = st.lincomb({{&z, 1.0}, {&k1, h * kA31}, {&k2, h * kA32}});
    NV k3 = st.apply(y3);
    NV y4 = st.lincomb({{&z, 1.0}, {&k1, h * kA41}, {&k2, h * kA42}, {&k3, h * kA43}});
    NV k4 = st.apply(y4);
    NV y5 = st.lincomb(
        {{&z, 1.0}, {&k1, h * kA51}, {&k2, h * kA52}, {&k3, h * kA53}, {&k4, h * kA54}});
    NV k5 = st.apply(y5);
    NV y6 = st.lincomb({{&z, 1.0},
                        {&k1, h * kA61},
                        {&k2, h * kA62},
                        {&k3, h * kA63},
                        {&k4, h * kA64},
                        {&k5, h * kA65}});
    NV k6 = st.apply(y6);
    NV y_new = st.lincomb({{&z, 1.0},
                           {&k1, h * kB1},
                           {&k3, h * kB3},
                           {&k4, h * kB4},
                           {&k5, h * kB5},
                           {&k6, h * kB6}});
    NV k7 = st.apply(y_new);

    const Matrix err = h * (kE1 * k1.v + kE3 * k3.v + kE4 * k4.v + kE5 * k5.v + kE6 * k6.v +
                            kE7 * k7.v);
    const double norm = dopri_error_norm(err, z.v, y_new.v, cfg.rtol, cfg.atol);
    const StepControl ctrl = dopri_step_control(norm, h);
    if (ctrl.accept) {
      check_finite(y_new.v, cfg.kind, substep);
      if (v && clipped) {
        // The clipped substep is the only one whose size tracks t_to
        // (dh/dt_to = 1); earlier accepted steps are controller-frozen, so
        // the incoming tangent is zero and the stage rule collapses to the
        // explicit product-rule terms below.
        Matrix yd = kA21 * k1.v;  // tangent of y2 divided by nothing: delta=1
        Matrix kd2 = st.deriv(yd);
        Matrix kd3, kd4, kd5, kd6, kd7;
        yd = kA31 * k1.v + kA32 * k2.v + h * (kA32 * kd2);
        kd3 = st.deriv(yd);
        yd = kA41 * k1.v + kA42 * k2.v + kA43 * k3.v + h * (kA42 * kd2 + kA43 * kd3);
        kd4 = st.deriv(yd);
        yd = kA51 * k1.v + kA52 * k2.v + kA53 * k3.v + kA54 * k4.v +
             h * (kA52 * kd2 + kA53 * kd3 + kA54 * kd4);
        kd5 = st.deriv(yd);
        yd = kA61 * k1.v + kA62 * k2.v + kA63 * k3.v + kA64 * k4.v + kA65 * k5.v +
             h * (kA62 * kd2 + kA63 * kd3 + kA64 * kd4 + kA65 * kd5);
        kd6 = st.deriv(yd);
        *v = kB1 * k1.v + kB3 * k3.v + kB4 * k4.v + kB5 * k5.v + kB6 * k6.v +
             h * (kB3 * kd3 + kB4 * kd4 + kB5 * kd5 + kB6 * kd6);
      }
      z = std::move(y_new);
      k1 = std::move(k7);  // FSAL
      t = clipped ? t_to : t + h;
      h = ctrl.next_h;
      if (clipped) break;
    } else {
      h = ctrl.next_h;
      if (h < 1e-12) {
        throw DivergenceError("dopri step size underflow (h < 1e-12) at substep " +
                              std::to_string(substep));
      }
    }
  }
}

SegmentOut integrate_segment_impl(const InteractionGraph& g, NV z, double t_from, double t_to,
                                  const SolverConfig& cfg, Tape* tape, bool want_tangent,
                                  std::int64_t& evals) {
  if (!(t_to > t_from)) {
    throw std::invalid_argument("integrate_segment: t_to must exceed t_from");
  }
  Stepper st(g, tape);
  NV start = z;  // kept for the no-residual subtraction
  Matrix tangent;
  Matrix* v = nullptr;
  if (want_tangent) {
    tangent = Matrix::Zero(z.v.rows(), z.v.cols());
    v = &tangent;
  }

  if (cfg.kind == SolverKind::Dopri) {
    dopri_segment(st, z, v, t_from, t_to, cfg);
  } else {
    fixed_step_segment(st, z, v, t_to - t_from, cfg);
  }

  if (!cfg.residual) {
    // Keep the integral increment only; the start state is dropped.
    z = st.lincomb({{&z, 1.0}, {&start, -1.0}});
  }

  evals += st.evals();
  SegmentOut out;
  out.z = std::move(z.v);
  out.node = z.node;
  if (want_tangent) out.tangent = std::move(tangent);
  return out;
}

}  // namespace

EmbeddingState integrate_segment(const InteractionGraph& g, const EmbeddingState& start,
                                 double t_from, double t_to, const SolverConfig& cfg) {
  cfg.validate();
  if (!start.joint.allFinite()) {
    throw std::invalid_argument("integrate_segment: start state must be finite");
  }
  NV z{start.joint, -1};
  std::int64_t evals = 0;
  SegmentOut seg = integrate_segment_impl(g, std::move(z), t_from, t_to, cfg, nullptr, false, evals);
  EmbeddingState out;
  out.user_count = start.user_count;
  out.time = t_to;
  out.joint = std::move(seg.z);
  return out;
}

Trajectory integrate_grid(const InteractionGraph& g, const ModelParams& params,
                          const SolverConfig& cfg, const IntegrateOptions& opts) {
  cfg.validate();
  params.validate_shapes(g);
  const auto times = params.grid.times();
  const int t_count = params.grid.t_count();

  Trajectory traj;
  if (opts.record_tape) traj.tape.emplace();
  Tape* tape = opts.record_tape ? &*traj.tape : nullptr;

  NV z{params.initial_state().joint, tape ? 0 : -1};

  EmbeddingState snap0;
  snap0.user_count = params.num_users();
  snap0.time = 0.0;
  snap0.joint = z.v;
  traj.snapshots.push_back(std::move(snap0));
  traj.snapshot_nodes.push_back(0);

  for (std::size_t seg = 0; seg + 1 < times.size(); ++seg) {
    const bool interior_end = static_cast<int>(seg) < t_count;
    const bool want_tangent = opts.time_tangents && interior_end;
    SegmentOut out = integrate_segment_impl(g, std::move(z), times[seg], times[seg + 1], cfg,
                                            tape, want_tangent, traj.step_count);
    z = NV{std::move(out.z), out.node};
    EmbeddingState snap;
    snap.user_count = params.num_users();
    snap.time = times[seg + 1];
    snap.joint = z.v;
    traj.snapshots.push_back(std::move(snap));
    traj.snapshot_nodes.push_back(out.node);
    if (want_tangent) traj.time_tangents.push_back(std::move(out.tangent));
  }
  return traj;
}

}  // namespace odecf
