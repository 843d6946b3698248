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

// Continuation in the delay along tau(s) = s * target, s in [0, 1], and
// distances between the extremals of a path and its tau = 0 seed.

#ifndef DPMP_HOMOTOPY_HPP
#define DPMP_HOMOTOPY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/pmp.hpp"
#include "dpmp/solver.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

/// Which delay components follow the path; the others stay at 0.
enum class PathMode { joint, pure_state, control_only };

inline const char* to_string(PathMode m) {
  switch (m) {
    case PathMode::joint: return "joint";
    case PathMode::pure_state: return "pure-state";
    case PathMode::control_only: return "control-only";
  }
  return "?";
}

inline PathMode path_mode_from_string(const std::string& s) {
  if (s == "joint") return PathMode::joint;
  if (s == "pure-state") return PathMode::pure_state;
  if (s == "control-only") return PathMode::control_only;
  throw ConfigError("unknown path mode '" + s + "' (joint, pure-state, control-only)");
}

/// Target actually followed under a path mode.
inline DelayVector path_target(const DelayVector& target, PathMode mode) {
  switch (mode) {
    case PathMode::joint: return target;
    case PathMode::pure_state: return {target.tau0, target.tau1, 0.0, target.delta};
    case PathMode::control_only: return {0.0, 0.0, target.tau2, target.delta};
  }
  return target;
}

struct HomotopyPolicy {
  double initial_step = 0.25;
  double min_step = 1.0 / 1024.0;
  PathMode mode = PathMode::joint;
  SolveConfig solve;

  void validate() const {
    if (!(initial_step > 0 && initial_step <= 1)) throw ConfigError("HomotopyPolicy: initial_step must lie in (0, 1]");
    if (!(min_step > 0 && min_step <= initial_step))
      throw ConfigError("HomotopyPolicy: min_step must lie in (0, initial_step]");
    solve.validate();
  }
};

struct HomotopyStep {
  double s = 0.0;
  DelayVector tau;
  Extremal extremal;
  ResidualReport report;
  bool accepted = false;
  int newton_iterations = 0;
  /// Failure message of a rejected step.
  std::string diagnostics;
};

struct HomotopyPath {
  std::vector<HomotopyStep> steps;
  DelayVector target;

  std::vector<const HomotopyStep*> accepted() const {
    std::vector<const HomotopyStep*> r;
    for (const auto& s : steps)
      if (s.accepted) r.push_back(&s);
    return r;
  }
  const HomotopyStep& last_accepted() const {
    for (auto it = steps.rbegin(); it != steps.rend(); ++it)
      if (it->accepted) return *it;
    throw ConfigError("HomotopyPath: no accepted step");
  }
};

/// The step size fell below the policy minimum; carries the partial path.
class HomotopyStuck : public Error {
 public:
  HomotopyStuck(const std::string& what, HomotopyPath path) : Error(what), path_(std::move(path)) {}
  const HomotopyPath& path() const noexcept { return path_; }
  const DelayVector& last_good() const { return path_.last_accepted().tau; }

 private:
  HomotopyPath path_;
};

using ProblemFamily = std::function<OcpProblem(const DelayVector&)>;

inline DelayVector scaled_delay(const DelayVector& target, double s) {
  return {s * target.tau0, s * target.tau1, s * target.tau2, target.delta};
}

inline DelayVector lerp_delay(const DelayVector& a, const DelayVector& b, double s) {
  return {a.tau0 + s * (b.tau0 - a.tau0), a.tau1 + s * (b.tau1 - a.tau1), a.tau2 + s * (b.tau2 - a.tau2), b.delta};
}

namespace detail {

inline HomotopyPath seeded_path(const ProblemFamily& family, const DelayVector& goal, const Extremal& seed,
                                const HomotopyPolicy& policy) {
  const DelayVector zero(0.0, 0.0, 0.0, goal.delta);
  HomotopyPath path;
  path.target = goal;
  const OcpProblem prob0 = family(zero);
  Extremal e = seed;
  e.tau = zero;
  HomotopyStep first;
  first.tau = zero;
  first.report = residual_report(prob0, e, policy.solve.sweep.integrator, policy.solve.report_lattice);
  if (!report_within(first.report, policy.solve))
    throw ConfigError("continue_to: seed does not solve the tau = 0 problem (" + describe(first.report) + ")");
  first.extremal = std::move(e);
  first.accepted = true;
  path.steps.push_back(std::move(first));
  return path;
}

/// Appends steps from the last accepted delay to `to` along a straight line.
inline void advance(const ProblemFamily& family, HomotopyPath& path, const DelayVector& to,
                    const HomotopyPolicy& policy) {
  const DelayVector from = path.last_accepted().tau;
  double s = 0.0, ds = policy.initial_step;
  int streak = 0;
  const bool trivial = from.tau0 == to.tau0 && from.tau1 == to.tau1 && from.tau2 == to.tau2;
  while (!trivial && s < 1.0) {
    const double s_try = std::min(1.0, s + ds);
    const DelayVector tau = s_try == 1.0 ? to : lerp_delay(from, to, s_try);
    const Extremal& warm = path.last_accepted().extremal;
    HomotopyStep step;
    step.s = s_try;
    step.tau = tau;
    try {
      const OcpProblem prob = family(tau);
      const ShootingMode mode = resolve_shooting_mode(tau, policy.solve.mode);
      SolveResult r = solve(prob, tau, unknowns_of(prob, warm, mode), warm, policy.solve);
      step.extremal = std::move(r.extremal);
      step.report = r.report;
      step.newton_iterations = static_cast<int>(r.trace.residual_norms.size()) - 1;
      step.accepted = true;
    } catch (const NewtonStalled& e) {
      step.diagnostics = e.what();
    } catch (const SweepDiverged& e) {
      step.diagnostics = e.what();
    } catch (const NonFiniteState& e) {
      step.diagnostics = e.what();
    }
    const bool ok = step.accepted;
    path.steps.push_back(std::move(step));
    if (ok) {
      s = s_try;
      if (++streak >= 2) {
        ds = std::min(2.0 * ds, policy.initial_step);
        streak = 0;
      }
    } else {
      streak = 0;
      ds *= 0.5;
      if (ds < policy.min_step) {
        std::ostringstream os;
        os << "homotopy stuck after tau = (" << path.last_accepted().tau.tau0 << ", "
           << path.last_accepted().tau.tau1 << ", " << path.last_accepted().tau.tau2 << "), step below "
           << policy.min_step << ": " << path.steps.back().diagnostics;
        throw HomotopyStuck(os.str(), std::move(path));
      }
    }
  }
}

}  // namespace detail

/// Follows tau(s) = s * path_target(target), warm-starting every solve from
/// the previous accepted extremal. The step in s halves on failure down to
/// min_step and doubles, up to initial_step, after two consecutive accepts.
inline HomotopyPath continue_to(const ProblemFamily& family, const DelayVector& target, const Extremal& seed,
                                const HomotopyPolicy& policy) {
  policy.validate();
  target.validate();
  const DelayVector goal = path_target(target, policy.mode);
  HomotopyPath path = detail::seeded_path(family, goal, seed, policy);
  detail::advance(family, path, goal, policy);
  return path;
}

/// Path through a ladder of delays visited in increasing size; every ladder
/// value is an accepted step, with continuation steps in between as needed.
inline HomotopyPath continue_through(const ProblemFamily& family, std::vector<DelayVector> ladder,
                                     const Extremal& seed, const HomotopyPolicy& policy) {
  policy.validate();
  if (ladder.empty()) throw ConfigError("continue_through: empty ladder");
  for (const auto& t : ladder) t.validate();
  auto size = [](const DelayVector& t) { return t.tau0 + t.tau1 + t.tau2; };
  std::sort(ladder.begin(), ladder.end(), [&](const DelayVector& a, const DelayVector& b) { return size(a) < size(b); });
  HomotopyPath path = detail::seeded_path(family, ladder.back(), seed, policy);
  for (const auto& t : ladder) detail::advance(family, path, t, policy);
  return path;
}

/// Family for a problem whose data does not depend on the delay.
inline ProblemFamily fixed_family(const OcpProblem& prob) {
  return [prob](const DelayVector&) { return prob; };
}

struct ContinuityRow {
  DelayVector tau;
  double sup_x = 0.0;
  double sup_p = 0.0;
  double dt_f = 0.0;
  double weak_u = 0.0;
  double strong_u = 0.0;
};

struct ContinuityReport {
  std::vector<ContinuityRow> rows;
  int test_set_size = 0;
};

/// Legendre polynomial P_j rescaled from [-1, 1] to [0, T].
inline double legendre_on(unsigned j, double t, double T) { return std::legendre(j, 2.0 * t / T - 1.0); }

/// Distances of each accepted step to the first one, on the common domain
/// [0, min(t_f, t_f^tau)] sampled at the finer of the two meshes.
/// weak_u is the largest |int (u - u_0)_c P_j dt| over the components c and
/// the first test_set_size Legendre polynomials; strong_u is the L2 norm.
inline ContinuityReport continuity_metrics(const HomotopyPath& path, int test_set_size = 4) {
  if (test_set_size < 1) throw ConfigError("continuity_metrics: test_set_size must be >= 1");
  const auto acc = path.accepted();
  ContinuityReport rep;
  rep.test_set_size = test_set_size;
  if (acc.empty()) return rep;
  const Extremal& e0 = acc.front()->extremal;
  for (const HomotopyStep* st : acc) {
    const Extremal& e = st->extremal;
    ContinuityRow row;
    row.tau = st->tau;
    row.dt_f = std::abs(e.t_f - e0.t_f);
    const double T = std::min(e.t_f, e0.t_f);
    const double h = std::min(e.u.body().grid().step(), e0.u.body().grid().step());
    const auto N = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
    const TimeGrid g(0.0, T, std::max<std::size_t>(N, 1));
    std::vector<Vec> du(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double t = g.node(k);
      row.sup_x = std::max(row.sup_x, (e.x.eval(t) - e0.x.eval(t)).lpNorm<Eigen::Infinity>());
      row.sup_p = std::max(row.sup_p, (e.p.eval(t) - e0.p.eval(t)).lpNorm<Eigen::Infinity>());
      du[k] = e.u.eval(t) - e0.u.eval(t);
    }
    // Trapezoidal rule on the control mesh, exact for the piecewise linear du
    // up to the polynomial weight.
    double l2 = 0.0;
    const Eigen::Index m = du.front().size();
    Mat weak = Mat::Zero(m, test_set_size);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
      const double a = g.node(k), b = g.node(k + 1), w = 0.5 * (b - a);
      l2 += w * (du[k].squaredNorm() + du[k + 1].squaredNorm());
      for (int j = 0; j < test_set_size; ++j)
        weak.col(j) += w * (legendre_on(static_cast<unsigned>(j), a, T) * du[k] +
                            legendre_on(static_cast<unsigned>(j), b, T) * du[k + 1]);
    }
    row.strong_u = std::sqrt(l2);
    row.weak_u = weak.cwiseAbs().maxCoeff();
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace dpmp

#endif  // DPMP_HOMOTOPY_HPP
