// Copyright 2026 The dpmp Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Indirect solver for a fixed delay vector: a damped forward-backward sweep
// for the coupled state/adjoint system and a damped Newton iteration on the
// shooting unknowns.
//
// Two shooting variants are used. Without state or control delays the
// unknown is p(0) and one joint forward pass of (x, p) evaluates the map.
// With advanced couplings the unknown seeds the adjoint at t_f and the sweep
// supplies the whole function p(.).

#ifndef DPMP_SOLVER_HPP
#define DPMP_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/integrator.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/pmp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

struct SweepConfig {
  int max_sweeps = 400;
  double damping = 0.5;
  double tol_fixed_point = 1e-10;
  IntegratorConfig integrator;
  SynthesisOptions synthesis;

  void validate() const {
    integrator.validate();
    if (max_sweeps < 1) throw ConfigError("SweepConfig: max_sweeps must be >= 1");
    if (!(damping > 0 && damping <= 1)) throw ConfigError("SweepConfig: damping must lie in (0, 1]");
    if (!(tol_fixed_point > 0)) throw ConfigError("SweepConfig: tol_fixed_point must be positive");
  }
};

struct ShootingUnknowns {
  /// p(0) in forward mode, p(t_f) in backward-seed mode.
  Vec p_init;
  std::optional<double> t_f;
};

enum class ShootingMode { automatic, forward, backward_seed };

inline const char* to_string(ShootingMode m) {
  switch (m) {
    case ShootingMode::automatic: return "automatic";
    case ShootingMode::forward: return "forward";
    case ShootingMode::backward_seed: return "backward-seed";
  }
  return "?";
}

struct SolveConfig {
  SweepConfig sweep;
  ShootingMode mode = ShootingMode::automatic;
  int max_newton = 40;
  double tol_newton = 1e-8;
  double fd_step = 1e-6;
  int max_backtracks = 8;
  /// Shooting segments in forward mode; interior segment starts join the
  /// Newton unknowns. 1 gives plain single shooting.
  std::size_t segments = 24;
  /// Mesh steps on [0, t_f]; 0 derives it from the integrator step.
  std::size_t mesh_steps = 0;
  // Acceptance thresholds of the residual report.
  double tol_adjoint = 1e-5;
  double tol_maximality = 1e-8;
  double tol_transversality = 1e-6;
  double tol_free_time = 1e-6;
  double tol_boundary = 1e-6;
  int report_lattice = 21;

  void validate() const {
    sweep.validate();
    if (max_newton < 0 || max_backtracks < 0) throw ConfigError("SolveConfig: iteration counts must be >= 0");
    if (segments < 1) throw ConfigError("SolveConfig: segments must be >= 1");
    for (double t : {tol_newton, fd_step, tol_adjoint, tol_maximality, tol_transversality, tol_free_time, tol_boundary})
      if (!(t > 0)) throw ConfigError("SolveConfig: tolerances must be positive");
  }
};

struct SolveTrace {
  std::vector<double> residual_norms;
  std::vector<double> step_lengths;
  /// Sweeps used by each accepted shooting evaluation (backward-seed only).
  std::vector<int> sweeps;
  std::vector<double> last_sweep_defects;
};

struct SolveResult {
  Extremal extremal;
  ResidualReport report;
  SolveTrace trace;
  ShootingUnknowns unknowns;
  ShootingMode mode = ShootingMode::forward;
  std::size_t mesh_steps = 0;
};

inline ShootingMode resolve_shooting_mode(const DelayVector& tau, ShootingMode m) {
  const bool coupled = tau.tau1 > 0 || tau.tau2 > 0;
  if (m == ShootingMode::automatic) return coupled ? ShootingMode::backward_seed : ShootingMode::forward;
  if (m == ShootingMode::forward && coupled)
    throw ConfigError("forward shooting needs tau1 = tau2 = 0");
  return m;
}

inline void check_final_time_mode(const OcpProblem& prob, const DelayVector& tau) {
  if (prob.final_time().is_free() && tau.tau2 > 0)
    throw ConfigError("free final time is not supported together with a control delay (tau2 > 0)");
}

/// Unknowns read off an extremal for the given shooting mode.
inline ShootingUnknowns unknowns_of(const OcpProblem& prob, const Extremal& ext, ShootingMode mode) {
  ShootingUnknowns u;
  u.p_init = mode == ShootingMode::forward ? ext.p.eval(0.0) : ext.p.eval(ext.t_f);
  if (prob.final_time().is_free()) u.t_f = ext.t_f;
  return u;
}

namespace detail {

inline TimeGrid control_grid(const TimeGrid& g) { return TimeGrid(g.t_start(), g.t_end(), 2 * g.n_steps()); }

/// f sampled on g after stretching time by t_old / t_new, linear.
inline SampledFunction resample(const SampledFunction& f, const TimeGrid& g) {
  const double scale = f.t_end() / g.t_end();
  if (f.grid().n_steps() == g.n_steps() && std::abs(scale - 1.0) <= 1e-15) return f;
  return SampledFunction::sample(
      g, [&](double t) { return f.eval(std::clamp(t * scale, f.t_start(), f.t_end())); }, Interp::linear);
}

inline std::size_t mesh_steps_for(const SolveConfig& cfg, const DelayVector& tau, double t_f) {
  if (cfg.mesh_steps > 0) return cfg.mesh_steps;
  return solution_grid(cfg.sweep.integrator, tau, t_f).n_steps();
}

}  // namespace detail

/// Residual of the boundary conditions for an extremal:
///   A x(t_f) - b, tangent components of p(t_f), and H(t_f) if t_f is free.
inline Vec boundary_residual(const OcpProblem& prob, const Extremal& ext) {
  const Target& tg = prob.target();
  const Eigen::Index nc = tg.n_constraints(), nt = tg.tangent_basis().cols();
  const bool free = prob.final_time().is_free();
  Vec r(nc + nt + (free ? 1 : 0));
  r.head(nc) = tg.defect(ext.x.eval(ext.t_f));
  r.segment(nc, nt) = tg.tangent_basis().transpose() * ext.p.eval(ext.t_f);
  if (free) r[nc + nt] = free_time_residual(prob, ext);
  return r;
}

namespace detail {

/// Joint (x, p) pass over nodes [k0, k1] of a forward-mode mesh.
struct JointSegment {
  std::size_t k0 = 0, k1 = 0;
  Mat Z, dZ;
  /// Controls on the half-step mesh of the segment.
  Mat U;
  std::vector<char> singular;
  Vec end() const { return Z.col(Z.cols() - 1); }
};

inline JointSegment joint_segment(const OcpProblem& prob, const DelayVector& tau, const TimeGrid& grid,
                                  std::size_t k0, std::size_t k1, const Vec& z0, const SweepConfig& cfg) {
  const Eigen::Index n = prob.n();
  const SynthesisMode mode = resolve_mode(prob, cfg.synthesis.mode);
  const TimeGrid sub(grid.node(k0), grid.node(k1), k1 - k0);
  JointSegment s;
  s.k0 = k0;
  s.k1 = k1;
  const auto cols = static_cast<Eigen::Index>(k1 - k0 + 1);
  s.Z.resize(2 * n, cols);
  s.dZ.resize(2 * n, cols);
  s.U = Mat::Zero(prob.m(), 2 * cols - 1);
  s.singular.assign(static_cast<std::size_t>(cols), 0);
  std::size_t node = 0;
  ControlChoice at_node;

  auto rhs = [&](double t, const Vec& z, int stage) -> Vec {
    MaximalityContext c;
    c.now = {t, t - tau.tau0, z.head(n), z.head(n), Vec(), Vec()};
    c.p = z.tail(n);
    c.p0 = -1.0;
    c.tied = true;
    ControlChoice ch = choose_control(prob, c, mode, cfg.synthesis);
    if (stage == 0) at_node = ch;
    // Both midpoint stages share one stored control: their mean.
    if (stage == 1 && cfg.integrator.scheme == Scheme::rk4) s.U.col(static_cast<Eigen::Index>(2 * node + 1)) = 0.5 * ch.u;
    if (stage == 2 && cfg.integrator.scheme == Scheme::rk4) s.U.col(static_cast<Eigen::Index>(2 * node + 1)) += 0.5 * ch.u;
    OcpProblem::Point a{t, t - tau.tau0, c.now.x, c.now.x, ch.u, ch.u};
    Vec dz(2 * n);
    dz.head(n) = prob.f(a);
    dz.tail(n) = -prob.dH_dx(a, c.p, -1.0) - prob.dH_dy(a, c.p, -1.0);
    return dz;
  };
  auto store = [&](std::size_t k, const Vec& z, const Vec& dz) {
    const auto c = static_cast<Eigen::Index>(k);
    s.Z.col(c) = z;
    s.dZ.col(c) = dz;
    s.U.col(2 * c) = at_node.u;
    s.singular[k] = at_node.singular ? 1 : 0;
    node = k;
  };
  march(sub, false, z0, cfg.integrator.scheme, rhs, store, std::nullopt, "forward_pass");
  if (cfg.integrator.scheme == Scheme::heun)
    for (Eigen::Index k = 0; k + 1 < cols; ++k) s.U.col(2 * k + 1) = 0.5 * (s.U.col(2 * k) + s.U.col(2 * k + 2));
  if (cfg.integrator.state_bound && s.Z.topRows(n).lpNorm<Eigen::Infinity>() > *cfg.integrator.state_bound)
    throw NonFiniteState("forward_pass: state bound exceeded");
  return s;
}

/// Extremal glued from consecutive segments; each interior node is taken
/// from the segment that starts there.
inline Extremal assemble_segments(const OcpProblem& prob, const DelayVector& tau, const TimeGrid& grid,
                                  const std::vector<JointSegment>& segs, const SweepConfig& cfg) {
  const Eigen::Index n = prob.n();
  const auto N = static_cast<Eigen::Index>(grid.n_steps());
  Mat Z(2 * n, N + 1), dZ(2 * n, N + 1), U(prob.m(), 2 * N + 1);
  std::size_t run = 0, longest = 0;
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const JointSegment& s = segs[j];
    const auto k0 = static_cast<Eigen::Index>(s.k0);
    const Eigen::Index len = s.Z.cols() - (j + 1 < segs.size() ? 1 : 0);
    Z.middleCols(k0, len) = s.Z.leftCols(len);
    dZ.middleCols(k0, len) = s.dZ.leftCols(len);
    U.middleCols(2 * k0, 2 * len - (j + 1 < segs.size() ? 0 : 1)) =
        s.U.leftCols(2 * len - (j + 1 < segs.size() ? 0 : 1));
    for (Eigen::Index k = 0; k < len; ++k) {
      run = s.singular[static_cast<std::size_t>(k)] ? run + 1 : 0;
      longest = std::max(longest, run);
    }
  }
  auto make = [&](const Mat& v, const Mat& d) {
    return cfg.integrator.dense_output ? SampledFunction(grid, v, d) : SampledFunction(grid, v, Interp::linear);
  };
  Extremal e;
  e.x = Trajectory(prob.history_state(), make(Z.topRows(n), dZ.topRows(n)));
  e.p = make(Z.bottomRows(n), dZ.bottomRows(n));
  e.p0 = -1.0;
  e.u = control_trajectory(prob, SampledFunction(control_grid(grid), U, Interp::linear));
  e.t_f = grid.t_end();
  e.tau = tau;
  e.singular = longest > 6;
  return e;
}

/// Node indices splitting N steps into at most `segments` pieces.
inline std::vector<std::size_t> segment_bounds(std::size_t N, std::size_t segments) {
  const std::size_t S = std::clamp<std::size_t>(segments, 1, N);
  std::vector<std::size_t> b(S + 1);
  for (std::size_t j = 0; j <= S; ++j) b[j] = j * N / S;
  return b;
}

}  // namespace detail

/// Joint forward integration of state and adjoint from p(0) = p_init with
/// the control synthesized at every stage. Requires tau1 = tau2 = 0.
inline Extremal forward_pass(const OcpProblem& prob, const DelayVector& tau, const Vec& p_init, double t_f,
                             std::size_t N, const SweepConfig& cfg) {
  if (tau.tau1 != 0.0 || tau.tau2 != 0.0) throw ConfigError("forward_pass: needs tau1 = tau2 = 0");
  if (p_init.size() != prob.n()) throw DimensionMismatch("forward_pass: p_init dimension");
  if (!(t_f > 0) || !std::isfinite(t_f)) throw ConfigError("forward_pass: final time must be positive");
  const TimeGrid grid(0.0, t_f, N);
  Vec z0(2 * prob.n());
  z0 << prob.history_state().eval(0.0), p_init;
  std::vector<detail::JointSegment> segs{detail::joint_segment(prob, tau, grid, 0, N, z0, cfg)};
  return detail::assemble_segments(prob, tau, grid, segs, cfg);
}

/// Extremal obtained from a constant admissible control and the adjoint
/// seeded at t_f; starting point of the sweep when no warm start exists.
inline Extremal initial_extremal(const OcpProblem& prob, const DelayVector& tau, const Vec& p_terminal, double t_f,
                                 std::size_t N, const SweepConfig& cfg) {
  const TimeGrid grid(0.0, t_f, N);
  Extremal e;
  e.u = control_trajectory(prob, SampledFunction::constant(detail::control_grid(grid),
                                                           prob.control_set().project(Vec::Zero(prob.m())),
                                                           Interp::linear));
  e.x = integrate_state_on(prob, tau, e.u, grid, cfg.integrator);
  e.p = integrate_adjoint_on(prob, tau, e.x, e.u, p_terminal, -1.0, grid, cfg.integrator);
  e.p0 = -1.0;
  e.t_f = t_f;
  e.tau = tau;
  return e;
}

struct SweepStats {
  std::vector<double> defects;
};

/// Damped forward-backward sweep on the mesh of N steps over [0, t_f] with
/// terminal adjoint p_terminal, warm-started from `warm` (resampled and
/// time-stretched when its horizon or mesh differ).
inline Extremal sweep_on(const OcpProblem& prob, const DelayVector& tau, const Extremal& warm, const Vec& p_terminal,
                         double t_f, std::size_t N, const SweepConfig& cfg, SweepStats* stats = nullptr) {
  cfg.validate();
  check_final_time_mode(prob, tau);
  const TimeGrid grid(0.0, t_f, N);
  const TimeGrid ugrid = detail::control_grid(grid);
  Extremal cur;
  cur.tau = tau;
  cur.t_f = t_f;
  cur.p0 = -1.0;
  cur.p = detail::resample(warm.p, grid);
  cur.u = control_trajectory(prob, detail::resample(warm.u.body(), ugrid));
  cur.x = integrate_state_on(prob, tau, cur.u, grid, cfg.integrator);

  std::vector<double> defects;
  double alpha = cfg.damping;
  for (int it = 0; it < cfg.max_sweeps; ++it) {
    SynthesisResult syn = synthesize_control(prob, tau, cur.x, cur.p, cur.p0, cur.u, t_f, ugrid, cfg.synthesis);
    const Mat& uold = cur.u.body().values();
    Mat unew = alpha * syn.u.values() + (1.0 - alpha) * uold;
    Trajectory u = control_trajectory(prob, SampledFunction(ugrid, unew, Interp::linear));
    Trajectory x = integrate_state_on(prob, tau, u, grid, cfg.integrator);
    SampledFunction pc = integrate_adjoint_on(prob, tau, x, u, p_terminal, cur.p0, grid, cfg.integrator);
    Mat pv = alpha * pc.values() + (1.0 - alpha) * cur.p.values();
    SampledFunction p = cur.p.interp() == Interp::cubic_hermite && pc.interp() == Interp::cubic_hermite
                            ? SampledFunction(grid, pv, Mat(alpha * pc.derivatives() + (1.0 - alpha) * cur.p.derivatives()))
                            : (pc.interp() == Interp::cubic_hermite ? SampledFunction(grid, pv, pc.derivatives())
                                                                     : SampledFunction(grid, pv, Interp::linear));
    const double d = (pv - cur.p.values()).lpNorm<Eigen::Infinity>() + (unew - uold).lpNorm<Eigen::Infinity>();
    if (!std::isfinite(d)) {
      defects.push_back(d);
      throw SweepDiverged("sweep: non-finite iterate", defects);
    }
    if (!defects.empty()) alpha = d > defects.back() ? std::max(alpha * 0.5, 1e-3) : cfg.damping;
    defects.push_back(d);
    cur.u = std::move(u);
    cur.x = std::move(x);
    cur.p = std::move(p);
    cur.singular = syn.singular;
    if (d < cfg.tol_fixed_point) {
      if (stats) stats->defects = defects;
      return cur;
    }
  }
  if (stats) stats->defects = defects;
  std::ostringstream os;
  os << "sweep: no fixed point after " << cfg.max_sweeps << " sweeps (last defect " << defects.back() << ")";
  throw SweepDiverged(os.str(), defects);
}

/// Sweep keeping warm's own horizon, mesh and terminal adjoint.
inline Extremal sweep(const OcpProblem& prob, const DelayVector& tau, const Extremal& warm, const SweepConfig& cfg,
                      SweepStats* stats = nullptr) {
  return sweep_on(prob, tau, warm, warm.p.eval(warm.t_f), warm.t_f, warm.p.grid().n_steps(), cfg, stats);
}

/// One evaluation of the shooting map: the extremal it produces and the
/// stacked boundary residual (same dimension as the unknowns).
struct ShotResult {
  Extremal extremal;
  Vec residual;
  int sweeps = 0;
  std::vector<double> sweep_defects;
};

inline ShotResult shoot(const OcpProblem& prob, const DelayVector& tau, const ShootingUnknowns& unk,
                        const std::optional<Extremal>& warm, std::size_t N, ShootingMode mode, const SweepConfig& cfg) {
  check_final_time_mode(prob, tau);
  if (unk.p_init.size() != prob.n()) throw DimensionMismatch("shooting: p_init dimension");
  if (prob.final_time().is_free() != unk.t_f.has_value())
    throw ConfigError("shooting: t_f unknown must be present exactly when the final time is free");
  const double t_f = unk.t_f ? *unk.t_f : prob.final_time().t_f;
  if (!(t_f > 0)) throw ConfigError("shooting: t_f must be positive");
  ShotResult r;
  if (resolve_shooting_mode(tau, mode) == ShootingMode::forward) {
    r.extremal = forward_pass(prob, tau, unk.p_init, t_f, N, cfg);
  } else {
    Extremal start = warm ? *warm : initial_extremal(prob, tau, unk.p_init, t_f, N, cfg);
    SweepStats st;
    r.extremal = sweep_on(prob, tau, start, unk.p_init, t_f, N, cfg, &st);
    r.sweeps = static_cast<int>(st.defects.size());
    r.sweep_defects = std::move(st.defects);
  }
  r.residual = boundary_residual(prob, r.extremal);
  return r;
}

inline Vec shooting_residual(const OcpProblem& prob, const DelayVector& tau, const ShootingUnknowns& unk,
                             const std::optional<Extremal>& warm, const SolveConfig& cfg) {
  const double t_f = unk.t_f ? *unk.t_f : prob.final_time().t_f;
  return shoot(prob, tau, unk, warm, detail::mesh_steps_for(cfg, tau, t_f), cfg.mode, cfg.sweep).residual;
}

namespace detail {

inline Vec pack(const ShootingUnknowns& u) {
  Vec z(u.p_init.size() + (u.t_f ? 1 : 0));
  z.head(u.p_init.size()) = u.p_init;
  if (u.t_f) z[u.p_init.size()] = *u.t_f;
  return z;
}

inline ShootingUnknowns unpack(const Vec& z, Eigen::Index n, bool free) {
  ShootingUnknowns u;
  u.p_init = z.head(n);
  if (free) u.t_f = z[n];
  return u;
}

}  // namespace detail

inline std::string describe(const ResidualReport& r) {
  std::ostringstream os;
  os << "adjoint " << r.adjoint_defect << ", maximality " << r.maximality_defect << ", transversality "
     << r.transversality_defect << ", free-time " << r.free_time_defect << ", boundary " << r.boundary_defect;
  return os.str();
}

inline bool report_within(const ResidualReport& r, const SolveConfig& cfg) {
  return r.adjoint_defect <= cfg.tol_adjoint && r.maximality_defect <= cfg.tol_maximality &&
         r.transversality_defect <= cfg.tol_transversality && r.free_time_defect <= cfg.tol_free_time &&
         r.boundary_defect <= cfg.tol_boundary;
}

namespace detail {

/// Forward-mode Newton with the horizon split into segments. Unknowns are
/// p(0), the (x, p) value at each interior segment start and t_f if free;
/// residuals are the joint defects followed by the boundary residual.
inline SolveResult solve_segmented(const OcpProblem& prob, const DelayVector& tau, const ShootingUnknowns& guess,
                                   const std::optional<Extremal>& warm, std::size_t N, const SolveConfig& cfg) {
  const bool free = prob.final_time().is_free();
  const Eigen::Index n = prob.n();
  const std::vector<std::size_t> bounds = segment_bounds(N, cfg.segments);
  const std::size_t S = bounds.size() - 1;
  const Eigen::Index nz = n + 2 * n * static_cast<Eigen::Index>(S - 1) + (free ? 1 : 0);
  const Vec x0 = prob.history_state().eval(0.0);
  double t_f = guess.t_f ? *guess.t_f : prob.final_time().t_f;

  Vec z(nz);
  z.head(n) = guess.p_init;
  if (free) z[nz - 1] = t_f;
  {
    std::optional<Extremal> src = warm;
    if (!src) {
      try {
        src = forward_pass(prob, tau, guess.p_init, t_f, N, cfg.sweep);
      } catch (const NonFiniteState&) {
      }
    }
    const TimeGrid grid(0.0, t_f, N);
    for (std::size_t j = 1; j < S; ++j) {
      const double t = grid.node(bounds[j]);
      auto seg = z.segment(n + 2 * n * static_cast<Eigen::Index>(j - 1), 2 * n);
      if (src) {
        const double ts = std::clamp(t * src->t_f / t_f, 0.0, src->t_f);
        seg << src->x.eval(ts), src->p.eval(ts);
      } else {
        seg << x0, guess.p_init;
      }
    }
  }
  if (!z.allFinite()) throw ConfigError("solve: initial guess is not finite");

  auto start = [&](const Vec& zz, std::size_t j) -> Vec {
    if (j == 0) {
      Vec s(2 * n);
      s << x0, zz.head(n);
      return s;
    }
    return zz.segment(n + 2 * n * static_cast<Eigen::Index>(j - 1), 2 * n);
  };
  auto grid_of = [&](const Vec& zz) { return TimeGrid(0.0, free ? zz[nz - 1] : t_f, N); };
  auto run = [&](const Vec& zz, const TimeGrid& g, std::size_t j) {
    return joint_segment(prob, tau, g, bounds[j], bounds[j + 1], start(zz, j), cfg.sweep);
  };
  struct State {
    std::vector<JointSegment> segs;
    Vec r;
  };
  auto residual = [&](const Vec& zz, const TimeGrid& g, std::vector<JointSegment> segs) {
    State st;
    const Vec b = boundary_residual(prob, assemble_segments(prob, tau, g, segs, cfg.sweep));
    st.r.resize(2 * n * static_cast<Eigen::Index>(S - 1) + b.size());
    for (std::size_t j = 0; j + 1 < S; ++j)
      st.r.segment(2 * n * static_cast<Eigen::Index>(j), 2 * n) = segs[j].end() - start(zz, j + 1);
    st.r.tail(b.size()) = b;
    st.segs = std::move(segs);
    return st;
  };
  auto full = [&](const Vec& zz) {
    const TimeGrid g = grid_of(zz);
    std::vector<JointSegment> segs;
    for (std::size_t j = 0; j < S; ++j) segs.push_back(run(zz, g, j));
    return residual(zz, g, std::move(segs));
  };

  SolveTrace trace;
  State cur = full(z);
  double norm = cur.r.norm();
  trace.residual_norms.push_back(norm);
  for (int it = 0; it < cfg.max_newton && !(norm < cfg.tol_newton); ++it) {
    const TimeGrid g = grid_of(z);
    Mat J(cur.r.size(), nz);
    for (Eigen::Index c = 0; c < nz; ++c) {
      Vec zc = z;
      const double d = cfg.fd_step * std::max(1.0, std::abs(z[c]));
      zc[c] += d;
      State sc;
      if (free && c == nz - 1) {
        sc = full(zc);
      } else {
        const std::size_t j = c < n ? 0 : static_cast<std::size_t>((c - n) / (2 * n)) + 1;
        std::vector<JointSegment> segs = cur.segs;
        segs[j] = run(zc, g, j);
        sc = residual(zc, g, std::move(segs));
      }
      J.col(c) = (sc.r - cur.r) / d;
    }
    Vec dz = J.colPivHouseholderQr().solve(-cur.r);
    if (!dz.allFinite()) throw NewtonStalled("solve: singular shooting Jacobian", norm);
    double lambda = 1.0;
    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b, lambda *= 0.5) {
      Vec zt = z + lambda * dz;
      if (free && !(zt[nz - 1] > 0)) continue;
      try {
        State trial = full(zt);
        const double tn = trial.r.norm();
        if (std::isfinite(tn) && tn < (1.0 - 1e-4 * lambda) * norm) {
          z = zt;
          cur = std::move(trial);
          norm = tn;
          accepted = true;
          break;
        }
      } catch (const NonFiniteState&) {
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "solve: line search failed at residual " << norm;
      throw NewtonStalled(os.str(), norm);
    }
    trace.residual_norms.push_back(norm);
    trace.step_lengths.push_back(lambda);
  }
  if (!(norm < cfg.tol_newton)) {
    std::ostringstream os;
    os << "solve: Newton did not converge (residual " << norm << ")";
    throw NewtonStalled(os.str(), norm);
  }
  SolveResult res;
  res.extremal = assemble_segments(prob, tau, grid_of(z), cur.segs, cfg.sweep);
  res.trace = std::move(trace);
  res.unknowns.p_init = z.head(n);
  if (free) res.unknowns.t_f = z[nz - 1];
  res.mode = ShootingMode::forward;
  res.mesh_steps = N;
  return res;
}

}  // namespace detail

/// Damped Newton on the shooting map with a forward-difference Jacobian and
/// backtracking. The returned extremal is normal (p0 = -1) and its residual
/// report is checked against the configured tolerances.
inline SolveResult solve(const OcpProblem& prob, const DelayVector& tau, const ShootingUnknowns& guess,
                         const std::optional<Extremal>& warm, const SolveConfig& cfg) {
  cfg.validate();
  check_final_time_mode(prob, tau);
  const ShootingMode mode = resolve_shooting_mode(tau, cfg.mode);
  const bool free = prob.final_time().is_free();
  const Eigen::Index n = prob.n();
  Vec z = detail::pack(guess);
  if (!z.allFinite()) throw ConfigError("solve: initial guess is not finite");
  const double t_f0 = guess.t_f ? *guess.t_f : prob.final_time().t_f;
  const std::size_t N = detail::mesh_steps_for(cfg, tau, t_f0);
  if (mode == ShootingMode::forward && cfg.segments > 1) {
    if (guess.p_init.size() != n) throw DimensionMismatch("solve: p_init dimension");
    if (free != guess.t_f.has_value())
      throw ConfigError("solve: t_f unknown must be present exactly when the final time is free");
    SolveResult res = detail::solve_segmented(prob, tau, guess, warm, N, cfg);
    res.report = residual_report(prob, res.extremal, cfg.sweep.integrator, cfg.report_lattice);
    if (!report_within(res.report, cfg))
      throw NewtonStalled("solve: residual report above tolerance (" + describe(res.report) + ")",
                          res.trace.residual_norms.back());
    return res;
  }

  SolveTrace trace;
  auto eval = [&](const Vec& zz, const std::optional<Extremal>& w) {
    return shoot(prob, tau, detail::unpack(zz, n, free), w, N, mode, cfg.sweep);
  };
  ShotResult cur = eval(z, warm);
  double norm = cur.residual.norm();
  trace.residual_norms.push_back(norm);
  trace.sweeps.push_back(cur.sweeps);

  for (int it = 0; it < cfg.max_newton && !(norm < cfg.tol_newton); ++it) {
    const std::optional<Extremal> w = mode == ShootingMode::backward_seed ? std::optional<Extremal>(cur.extremal)
                                                                         : std::nullopt;
    Mat J(cur.residual.size(), z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      Vec zj = z;
      const double d = cfg.fd_step * std::max(1.0, std::abs(z[j]));
      zj[j] += d;
      J.col(j) = (eval(zj, w).residual - cur.residual) / d;
    }
    Vec dz = J.colPivHouseholderQr().solve(-cur.residual);
    if (!dz.allFinite()) throw NewtonStalled("solve: singular shooting Jacobian", norm);
    double lambda = 1.0;
    bool accepted = false;
    for (int b = 0; b <= cfg.max_backtracks; ++b, lambda *= 0.5) {
      Vec zt = z + lambda * dz;
      if (free && !(zt[n] > 0)) continue;
      try {
        ShotResult trial = eval(zt, w);
        const double tn = trial.residual.norm();
        if (std::isfinite(tn) && tn < (1.0 - 1e-4 * lambda) * norm) {
          z = zt;
          cur = std::move(trial);
          norm = tn;
          accepted = true;
          break;
        }
      } catch (const SweepDiverged&) {
      } catch (const NonFiniteState&) {
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "solve: line search failed at residual " << norm;
      throw NewtonStalled(os.str(), norm);
    }
    trace.residual_norms.push_back(norm);
    trace.step_lengths.push_back(lambda);
    trace.sweeps.push_back(cur.sweeps);
  }
  if (!(norm < cfg.tol_newton)) {
    std::ostringstream os;
    os << "solve: Newton did not converge (residual " << norm << ")";
    throw NewtonStalled(os.str(), norm);
  }
  trace.last_sweep_defects = cur.sweep_defects;
  SolveResult res;
  res.extremal = std::move(cur.extremal);
  res.extremal.p0 = -1.0;
  res.report = residual_report(prob, res.extremal, cfg.sweep.integrator, cfg.report_lattice);
  res.trace = std::move(trace);
  res.unknowns = detail::unpack(z, n, free);
  res.mode = mode;
  res.mesh_steps = N;
  if (!report_within(res.report, cfg))
    throw NewtonStalled("solve: residual report above tolerance (" + describe(res.report) + ")", norm);
  return res;
}

}  // namespace dpmp

#endif  // DPMP_SOLVER_HPP
