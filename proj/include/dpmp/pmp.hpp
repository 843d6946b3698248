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

// Extremals, control synthesis from the maximality condition, and the
// residuals of the necessary conditions.

#ifndef DPMP_PMP_HPP
#define DPMP_PMP_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/integrator.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

/// (x, p, p0, u) on [0, t_f] for delays tau; x and u carry their histories.
struct Extremal {
  Trajectory x;
  SampledFunction p;
  double p0 = -1.0;
  Trajectory u;
  double t_f = 1.0;
  DelayVector tau;
  /// Set when the switching function vanished on more than five cells.
  bool singular = false;

  void validate(const OcpProblem& prob) const {
    if (p0 > 0) throw ConfigError("Extremal: p0 must be nonpositive");
    if (p.values().lpNorm<Eigen::Infinity>() + std::abs(p0) == 0.0)
      throw ConfigError("Extremal: (p, p0) must be nontrivial");
    const auto& body = u.body();
    for (std::size_t k = 0; k < body.grid().size(); ++k)
      if (!prob.control_set().contains(body.node_value(k), 1e-8))
        throw ConfigError("Extremal: control leaves the control set");
  }
};

enum class SynthesisMode { automatic, affine_ball, affine_box, quadratic_regularized, grid_search };

inline const char* to_string(SynthesisMode m) {
  switch (m) {
    case SynthesisMode::automatic: return "automatic";
    case SynthesisMode::affine_ball: return "affine-ball";
    case SynthesisMode::affine_box: return "affine-box";
    case SynthesisMode::quadratic_regularized: return "quadratic-regularized";
    case SynthesisMode::grid_search: return "grid-search";
  }
  return "?";
}

inline SynthesisMode synthesis_mode_from_string(const std::string& s) {
  for (auto m : {SynthesisMode::automatic, SynthesisMode::affine_ball, SynthesisMode::affine_box,
                 SynthesisMode::quadratic_regularized, SynthesisMode::grid_search})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown synthesis mode '" + s + "'");
}

struct MaximalityContext;
struct ControlChoice;

struct SynthesisOptions {
  SynthesisMode mode = SynthesisMode::automatic;
  /// Points per dimension of the lattice used by grid-search.
  int lattice = 21;
  double tol_singular = 1e-9;
  /// Called with every context and the control chosen for it.
  std::function<void(const MaximalityContext&, const ControlChoice&)> observer;
};

/// Mode picked by `automatic`: closed forms for control-affine problems,
/// lattice search otherwise.
inline SynthesisMode resolve_mode(const OcpProblem& prob, SynthesisMode m) {
  if (m != SynthesisMode::automatic) return m;
  if (!prob.affine()) return SynthesisMode::grid_search;
  if (prob.affine()->is_quadratic()) return SynthesisMode::quadratic_regularized;
  switch (prob.control_set().kind()) {
    case ControlSet::Kind::ball: return SynthesisMode::affine_ball;
    case ControlSet::Kind::box: return SynthesisMode::affine_box;
    default: return SynthesisMode::grid_search;
  }
}

/// Everything the maximality condition needs at time t except the control
/// being chosen. `now.v` is u(t - tau2); `lead` is the point at t + tau2
/// (with `lead->u` = u(t + tau2)) when the indicator of [0, t_f - tau2] is 1.
/// With tau2 = 0 the candidate fills both control slots (`tied`).
struct MaximalityContext {
  OcpProblem::Point now;
  Vec p;
  std::optional<OcpProblem::Point> lead;
  Vec p_lead;
  double p0 = -1.0;
  bool tied = false;
};

/// Left side of the maximality condition as a function of the candidate w.
inline double maximality_objective(const OcpProblem& prob, const MaximalityContext& c, const Vec& w) {
  OcpProblem::Point a = c.now;
  a.u = w;
  if (c.tied) a.v = w;
  double r = prob.hamiltonian(a, c.p, c.p0);
  if (c.lead) {
    OcpProblem::Point b = *c.lead;
    b.v = w;
    r += prob.hamiltonian(b, c.p_lead, c.p0);
  }
  return r;
}

/// Coefficient of w in the maximality objective for control-affine problems
/// (linear part only; quadratic weights are handled by the caller).
inline Vec switching_function(const OcpProblem& prob, const MaximalityContext& c) {
  const auto& s = *prob.affine();
  const auto& a = c.now;
  Vec phi = s.f1(a.t, a.s, a.x, a.y).transpose() * c.p;
  if (s.cost_u) phi += c.p0 * s.cost_u(a.t, a.s, a.x, a.y);
  if (c.tied) {
    phi += s.f2(a.t, a.s, a.x, a.y).transpose() * c.p;
    if (s.cost_v) phi += c.p0 * s.cost_v(a.t, a.s, a.x, a.y);
  }
  if (c.lead) {
    const auto& b = *c.lead;
    phi += s.f2(b.t, b.s, b.x, b.y).transpose() * c.p_lead;
    if (s.cost_v) phi += c.p0 * s.cost_v(b.t, b.s, b.x, b.y);
  }
  return phi;
}

struct ControlChoice {
  Vec u;
  bool singular = false;
};

namespace detail {

inline ControlChoice maximize_control(const OcpProblem& prob, const MaximalityContext& c, SynthesisMode mode,
                                    const SynthesisOptions& opts) {
  const ControlSet& U = prob.control_set();
  const double tol = opts.tol_singular * std::max(c.p.lpNorm<Eigen::Infinity>(), 1e-300);
  switch (mode) {
    case SynthesisMode::affine_ball: {
      Vec phi = switching_function(prob, c);
      const double n = phi.norm();
      if (n < tol) return {Vec::Zero(prob.m()), true};
      return {Vec(U.radius() * phi / n), false};
    }
    case SynthesisMode::affine_box: {
      Vec phi = switching_function(prob, c);
      Vec u(prob.m());
      bool singular = false;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (std::abs(phi[i]) < tol) {
          u[i] = 0.5 * (U.lower()[i] + U.upper()[i]);
          singular = true;
        } else {
          u[i] = phi[i] > 0 ? U.upper()[i] : U.lower()[i];
        }
      }
      return {u, singular};
    }
    case SynthesisMode::quadratic_regularized: {
      const auto& s = *prob.affine();
      const double curvature = -c.p0 * (s.quad_u + (c.lead || c.tied ? s.quad_v : 0.0));
      if (!(curvature > 0))
        throw ConfigError("quadratic-regularized synthesis needs p0 < 0 and a positive control weight");
      return {U.project(switching_function(prob, c) / (2.0 * curvature)), false};
    }
    case SynthesisMode::grid_search:
    case SynthesisMode::automatic: {
      Vec best;
      double best_val = -std::numeric_limits<double>::infinity();
      for (const Vec& w : U.lattice(opts.lattice)) {
        const double v = maximality_objective(prob, c, w);
        if (v > best_val) {
          best_val = v;
          best = w;
        }
      }
      return {best, false};
    }
  }
  return {Vec::Zero(prob.m()), false};
}

}  // namespace detail

inline ControlChoice choose_control(const OcpProblem& prob, const MaximalityContext& c, SynthesisMode mode,
                                    const SynthesisOptions& opts) {
  ControlChoice ch = detail::maximize_control(prob, c, mode, opts);
  if (opts.observer) opts.observer(c, ch);
  return ch;
}

/// Context at time t from stored x and p and a reference control u_ref
/// (supplies u(t - tau2) and the control at t + tau2).
template <class X, class P, class U>
MaximalityContext context_at(const OcpProblem& prob, const DelayVector& tau, const X& x, const P& p, double p0,
                             const U& u_ref, double t_f, double t) {
  MaximalityContext c;
  c.p = p.eval(t);
  c.p0 = p0;
  if (tau.tau2 == 0.0) {
    c.now = {t, t - tau.tau0, x.eval(t), eval_delayed(x, t, tau.tau1), Vec(), Vec()};
    c.tied = true;
    return c;
  }
  c.now = {t, t - tau.tau0, x.eval(t), eval_delayed(x, t, tau.tau1), Vec(), eval_delayed(u_ref, t, tau.tau2)};
  if (advanced_indicator(t, tau.tau2, t_f) == 1) {
    const double ta = std::min(t + tau.tau2, t_f);
    c.lead = OcpProblem::Point{ta, ta - tau.tau0, x.eval(ta), eval_delayed(x, ta, tau.tau1), u_ref.eval(ta), Vec()};
    c.p_lead = p.eval(ta);
  }
  return c;
}

struct SynthesisResult {
  SampledFunction u;
  bool singular = false;
  /// Longest run of consecutive cells with a vanishing switching function.
  std::size_t longest_singular_run = 0;
};

/// Pointwise maximization on the nodes of `grid`, linearly interpolated.
template <class X, class P, class U>
SynthesisResult synthesize_control(const OcpProblem& prob, const DelayVector& tau, const X& x, const P& p, double p0,
                                   const U& u_ref, double t_f, const TimeGrid& grid,
                                   const SynthesisOptions& opts = {}) {
  const SynthesisMode mode = resolve_mode(prob, opts.mode);
  Mat values(prob.m(), static_cast<Eigen::Index>(grid.size()));
  std::size_t run = 0, longest = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    ControlChoice ch = choose_control(prob, context_at(prob, tau, x, p, p0, u_ref, t_f, t), mode, opts);
    values.col(static_cast<Eigen::Index>(k)) = ch.u;
    run = ch.singular ? run + 1 : 0;
    longest = std::max(longest, run);
  }
  const std::size_t cells = longest > 0 ? longest - 1 : 0;
  return {SampledFunction(grid, values, Interp::linear), cells > 5, cells};
}

struct ResidualReport {
  double adjoint_defect = 0.0;
  double maximality_defect = 0.0;
  double transversality_defect = 0.0;
  double free_time_defect = 0.0;
  double boundary_defect = 0.0;

  double max() const {
    return std::max({adjoint_defect, maximality_defect, transversality_defect, free_time_defect, boundary_defect});
  }
};

/// Largest gain of any lattice point over the stored control in the
/// maximality objective, over the control mesh. <= 0 certifies maximality on
/// the lattice.
inline double maximality_defect(const OcpProblem& prob, const Extremal& ext, int lattice_size) {
  const auto lattice = prob.control_set().lattice(lattice_size);
  const TimeGrid& grid = ext.u.body().grid();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid.node(k);
    MaximalityContext c = context_at(prob, ext.tau, ext.x, ext.p, ext.p0, ext.u, ext.t_f, t);
    const double ref = maximality_objective(prob, c, ext.u.eval(t));
    for (const Vec& w : lattice) worst = std::max(worst, maximality_objective(prob, c, w) - ref);
  }
  return worst;
}

/// Component of p(t_f) tangent to the target; zero for point targets.
inline Vec transversality_residual(const Extremal& ext, const Target& target) {
  return target.transversality(ext.p.eval(ext.t_f));
}

/// H at the final time; only defined for free final time.
inline double free_time_residual(const OcpProblem& prob, const Extremal& ext) {
  if (!prob.final_time().is_free()) throw ConfigError("free_time_residual: final time is fixed");
  return prob.hamiltonian(point_at(ext.x, ext.u, ext.tau, ext.t_f), ext.p.eval(ext.t_f), ext.p0);
}

/// Sup distance on the adjoint mesh between p and the adjoint recomputed
/// backward from p(t_f) along the stored (x, u).
inline double adjoint_defect(const OcpProblem& prob, const Extremal& ext, const IntegratorConfig& cfg) {
  const TimeGrid& grid = ext.p.grid();
  SampledFunction q = integrate_adjoint_on(prob, ext.tau, ext.x, ext.u, ext.p.eval(ext.t_f), ext.p0, grid, cfg);
  return (q.values() - ext.p.values()).lpNorm<Eigen::Infinity>();
}

inline ResidualReport residual_report(const OcpProblem& prob, const Extremal& ext, const IntegratorConfig& cfg,
                                      int lattice_size = 21) {
  ResidualReport r;
  r.adjoint_defect = adjoint_defect(prob, ext, cfg);
  r.maximality_defect = std::max(0.0, maximality_defect(prob, ext, lattice_size));
  r.transversality_defect = transversality_residual(ext, prob.target()).lpNorm<Eigen::Infinity>();
  if (prob.final_time().is_free()) r.free_time_defect = std::abs(free_time_residual(prob, ext));
  r.boundary_defect = prob.target().defect(ext.x.eval(ext.t_f)).norm();
  return r;
}

}  // namespace dpmp

#endif  // DPMP_PMP_HPP
