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

// Fixed-step method of steps for the delayed state equation (forward) and
// the advanced adjoint equation (backward), plus cost quadrature.

#ifndef DPMP_INTEGRATOR_HPP
#define DPMP_INTEGRATOR_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>

#include "dpmp/errors.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

enum class Scheme { rk4, heun };

inline const char* to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "heun"; }

struct IntegratorConfig {
  double h = 1e-3;
  Scheme scheme = Scheme::rk4;
  bool dense_output = true;
  /// Divergence guard on the sup norm of integrated states.
  std::optional<double> state_bound;

  void validate() const {
    if (!(h > 0) || !std::isfinite(h)) throw ConfigError("IntegratorConfig: step h must be positive");
    if (state_bound && !(*state_bound > 0)) throw ConfigError("IntegratorConfig: state_bound must be positive");
  }
};

/// Step actually used: h capped at a quarter of the smallest positive
/// state or control delay.
inline double effective_step(const IntegratorConfig& cfg, const DelayVector& tau) {
  cfg.validate();
  return std::min(cfg.h, tau.min_interpolated_lag() / 4.0);
}

inline TimeGrid solution_grid(const IntegratorConfig& cfg, const DelayVector& tau, double t_f) {
  if (!(t_f > 0) || !std::isfinite(t_f)) throw ConfigError("final time must be positive");
  return TimeGrid::with_max_step(0.0, t_f, effective_step(cfg, tau));
}

/// Uniform-grid storage filled one node at a time (forward or backward),
/// readable by cubic Hermite interpolation over already completed cells.
/// Reads before the grid start fall through to an optional history.
class DenseBuffer {
 public:
  DenseBuffer(TimeGrid grid, Eigen::Index dim, std::optional<SampledFunction> history = std::nullopt)
      : grid_(grid),
        values_(Mat::Zero(dim, static_cast<Eigen::Index>(grid.size()))),
        derivs_(Mat::Zero(dim, static_cast<Eigen::Index>(grid.size()))),
        filled_(grid.size(), 0),
        history_(std::move(history)) {}

  const TimeGrid& grid() const noexcept { return grid_; }
  Eigen::Index dim() const noexcept { return values_.rows(); }
  double t_start() const noexcept { return history_ ? history_->t_start() : grid_.t_start(); }
  double t_end() const noexcept { return grid_.t_end(); }
  bool contains(double t) const noexcept {
    return (history_ && history_->contains(t)) || grid_.contains(t);
  }

  void set(std::size_t k, const Vec& value, const Vec& deriv) {
    values_.col(static_cast<Eigen::Index>(k)) = value;
    derivs_.col(static_cast<Eigen::Index>(k)) = deriv;
    filled_[k] = 1;
  }

  Vec eval(double t) const {
    const double slack = time_slack(grid_.t_start(), grid_.t_end());
    if (history_ && t < grid_.t_start() - slack) return history_->eval(t);
    if (!grid_.contains(t)) {
      std::ostringstream os;
      os << std::setprecision(17) << "DenseBuffer: read at t=" << t << " outside ["
         << grid_.t_start() << ", " << grid_.t_end() << "]";
      throw OutOfDomain(os.str());
    }
    if (auto k = grid_.node_index(t)) {
      require(*k);
      return values_.col(static_cast<Eigen::Index>(*k));
    }
    const std::size_t k = grid_.cell(t);
    require(k);
    require(k + 1);
    const auto c = static_cast<Eigen::Index>(k);
    const double h = grid_.step();
    const double s = std::clamp((t - grid_.node(k)) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * values_.col(c) + (s3 - 2 * s2 + s) * h * derivs_.col(c) +
           (-2 * s3 + 3 * s2) * values_.col(c + 1) + (s3 - s2) * h * derivs_.col(c + 1);
  }

  SampledFunction finish(bool hermite = true) const {
    if (hermite) return SampledFunction(grid_, values_, derivs_);
    return SampledFunction(grid_, values_, Interp::linear);
  }

 private:
  void require(std::size_t k) const {
    if (!filled_[k]) {
      std::ostringstream os;
      os << std::setprecision(17) << "DenseBuffer: node t=" << grid_.node(k)
         << " read before it was computed (step too large for the delay)";
      throw OutOfDomain(os.str());
    }
  }

  TimeGrid grid_;
  Mat values_;
  Mat derivs_;
  std::vector<char> filled_;
  std::optional<SampledFunction> history_;
};

namespace detail {

inline void check_state(const Vec& z, double t, const std::optional<double>& bound, const char* what) {
  if (!z.allFinite() || (bound && z.lpNorm<Eigen::Infinity>() > *bound)) {
    std::ostringstream os;
    os << std::setprecision(17) << what << ": state left the admissible range at t=" << t;
    throw NonFiniteState(os.str());
  }
}

}  // namespace detail

/// One-step march over a uniform grid. `rhs(t, z)` gives the derivative
/// (`rhs(t, z, stage)` also receives the stage index, 0 at the node),
/// `store(k, z, dz)` receives node k before the step leaving it is taken, so
/// interpolated reads of completed cells see both endpoint derivatives.
template <class Rhs, class Store>
void march(const TimeGrid& grid, bool backward, Vec z, Scheme scheme, const Rhs& rhs,
           const Store& store, const std::optional<double>& bound = std::nullopt,
           const char* what = "march") {
  const std::size_t N = grid.n_steps();
  auto f = [&](double t, const Vec& z, int stage) -> Vec {
    if constexpr (std::is_invocable_v<const Rhs&, double, const Vec&, int>)
      return rhs(t, z, stage);
    else
      return rhs(t, z);
  };
  const double hs = backward ? -grid.step() : grid.step();
  for (std::size_t j = 0;; ++j) {
    const std::size_t k = backward ? N - j : j;
    const double t = grid.node(k);
    detail::check_state(z, t, bound, what);
    Vec k1 = f(t, z, 0);
    store(k, z, k1);
    if (j == N) break;
    const double tn = grid.node(backward ? k - 1 : k + 1);
    if (scheme == Scheme::rk4) {
      const double tm = 0.5 * (t + tn);
      Vec k2 = f(tm, z + 0.5 * hs * k1, 1);
      Vec k3 = f(tm, z + 0.5 * hs * k2, 2);
      Vec k4 = f(tn, z + hs * k3, 3);
      z += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      Vec k2 = f(tn, z + hs * k1, 1);
      z += 0.5 * hs * (k1 + k2);
    }
  }
}

/// Control trajectory on [-Delta, t_f]: the problem's control history glued
/// in front of `body`.
inline Trajectory control_trajectory(const OcpProblem& prob, SampledFunction body) {
  return Trajectory(prob.history_control(), std::move(body));
}

/// Evaluation point (t, t - tau0, x(t), x(t - tau1), u(t), u(t - tau2)).
template <class X, class U>
OcpProblem::Point point_at(const X& x, const U& u, const DelayVector& tau, double t) {
  return {t, t - tau.tau0, x.eval(t), eval_delayed(x, t, tau.tau1), u.eval(t), eval_delayed(u, t, tau.tau2)};
}

/// point_at with the delayed control read as a one-sided limit at its
/// history junction.
inline OcpProblem::Point point_at(const Trajectory& x, const Trajectory& u, const DelayVector& tau, double t,
                                  int side) {
  return {t, t - tau.tau0, x.eval(t), eval_delayed(x, t, tau.tau1), u.eval(t),
          tau.tau2 == 0.0 ? u.eval(t) : u.eval(t - tau.tau2, side)};
}

/// Side from which a stage at a cell endpoint sees the cell: the first stage
/// sits at the start node, the last one at the end node.
inline int stage_side(Scheme s, int stage, bool backward) {
  const int last = s == Scheme::rk4 ? 3 : 1;
  if (stage == 0) return backward ? -1 : 1;
  if (stage == last) return backward ? 1 : -1;
  return 0;
}

/// Delayed state on the given grid; the result carries the state history.
inline Trajectory integrate_state_on(const OcpProblem& prob, const DelayVector& tau, const Trajectory& u,
                                     const TimeGrid& grid, const IntegratorConfig& cfg) {
  if (u.dim() != prob.m()) throw DimensionMismatch("integrate_state: control dimension");
  DenseBuffer buf(grid, prob.n(), prob.history_state());
  auto rhs = [&](double t, const Vec& z, int stage) {
    const int side = stage_side(cfg.scheme, stage, false);
    OcpProblem::Point a{t, t - tau.tau0, z, tau.tau1 == 0.0 ? z : eval_delayed(buf, t, tau.tau1), u.eval(t),
                        tau.tau2 == 0.0 ? u.eval(t) : u.eval(t - tau.tau2, side)};
    return prob.f(a);
  };
  auto store = [&](std::size_t k, const Vec& z, const Vec& dz) { buf.set(k, z, dz); };
  march(grid, false, prob.history_state().eval(0.0), cfg.scheme, rhs, store, cfg.state_bound,
        "integrate_state");
  return Trajectory(prob.history_state(), buf.finish(cfg.dense_output));
}

inline Trajectory integrate_state(const OcpProblem& prob, const DelayVector& tau, const Trajectory& u,
                                  double t_f, const IntegratorConfig& cfg) {
  return integrate_state_on(prob, tau, u, solution_grid(cfg, tau, t_f), cfg);
}

/// Composite Simpson rule on the grid cells.
template <class X, class U>
double integrate_cost_on(const OcpProblem& prob, const DelayVector& tau, const X& x, const U& u,
                         const TimeGrid& grid) {
  auto f0 = [&](double t) { return prob.f0(point_at(x, u, tau, t)); };
  double sum = 0.0;
  double left = f0(grid.node(0));
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double a = grid.node(k), b = grid.node(k + 1);
    const double right = f0(b);
    sum += (b - a) / 6.0 * (left + 4.0 * f0(0.5 * (a + b)) + right);
    left = right;
  }
  return sum;
}

template <class X, class U>
double integrate_cost(const OcpProblem& prob, const DelayVector& tau, const X& x, const U& u, double t_f,
                      const IntegratorConfig& cfg) {
  return integrate_cost_on(prob, tau, x, u, solution_grid(cfg, tau, t_f));
}

/// Right-hand side of the adjoint equation at time t with p(t) = p and the
/// advanced value p(t + tau1) supplied by `p_lead` (only called when the
/// indicator of [0, t_f - tau1] is 1). A nonzero `side` takes one-sided
/// limits at the indicator switch and at the control history junction.
template <class X, class U, class Lead>
Vec adjoint_rhs(const OcpProblem& prob, const DelayVector& tau, const X& x, const U& u, double t_f, double t,
                const Vec& p, double p0, const Lead& p_lead, int side = 0) {
  auto at = [&](double s) {
    if constexpr (std::is_same_v<X, Trajectory> && std::is_same_v<U, Trajectory>)
      return point_at(x, u, tau, s, side);
    else
      return point_at(x, u, tau, s);
  };
  Vec r = -prob.dH_dx(at(t), p, p0);
  if (advanced_indicator(t, tau.tau1, t_f, side) == 1) {
    const double ta = std::min(t + tau.tau1, t_f);
    const Vec pa = tau.tau1 == 0.0 ? p : Vec(p_lead(ta));
    r -= prob.dH_dy(at(ta), pa, p0);
  }
  return r;
}

/// Backward integration of the adjoint from p(t_f) = p_terminal on `grid`.
template <class X, class U>
SampledFunction integrate_adjoint_on(const OcpProblem& prob, const DelayVector& tau, const X& x, const U& u,
                                     const Vec& p_terminal, double p0, const TimeGrid& grid,
                                     const IntegratorConfig& cfg) {
  if (p_terminal.size() != prob.n()) throw DimensionMismatch("integrate_adjoint: terminal adjoint dimension");
  const double t_f = grid.t_end();
  DenseBuffer buf(grid, prob.n());
  auto lead = [&](double ta) { return buf.eval(ta); };
  auto rhs = [&](double t, const Vec& p, int stage) {
    return adjoint_rhs(prob, tau, x, u, t_f, t, p, p0, lead, stage_side(cfg.scheme, stage, true));
  };
  auto store = [&](std::size_t k, const Vec& z, const Vec& dz) { buf.set(k, z, dz); };
  march(grid, true, p_terminal, cfg.scheme, rhs, store, std::nullopt, "integrate_adjoint");
  return buf.finish(cfg.dense_output);
}

template <class X, class U>
SampledFunction integrate_adjoint(const OcpProblem& prob, const DelayVector& tau, const X& x, const U& u,
                                  const Vec& p_terminal, double p0, double t_f, const IntegratorConfig& cfg) {
  return integrate_adjoint_on(prob, tau, x, u, p_terminal, p0, solution_grid(cfg, tau, t_f), cfg);
}

}  // namespace dpmp

#endif  // DPMP_INTEGRATOR_HPP
