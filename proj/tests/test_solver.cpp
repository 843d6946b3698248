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

#include <gtest/gtest.h>

#include <cmath>

#include "dpmp/presets.hpp"
#include "dpmp/problems.hpp"
#include "dpmp/solver.hpp"
#include "oracles/classical_lq.hpp"
#include "oracles/collocation.hpp"
#include "oracles/counterexample.hpp"
#include "support.hpp"

namespace dpmp {
namespace {

using testing::vec;

SolveResult solve_builtin(const OcpProblem& prob, const DelayVector& tau) {
  return solve(prob, tau, builtin_guess(prob), std::nullopt, builtin_solve_config(prob, tau));
}

double sup_distance(const std::function<Vec(double)>& a, const std::function<Vec(double)>& b, double T, int n = 2000) {
  double e = 0;
  for (int k = 0; k <= n; ++k) {
    const double t = T * k / n;
    e = std::max(e, (a(t) - b(t)).lpNorm<Eigen::Infinity>());
  }
  return e;
}

TEST(Solve, CounterexampleWithoutDelayRecoversKnownExtremal) {
  const OcpProblem prob = build_counterexample(10.0);
  const SolveResult r = solve_builtin(prob, counterexample_delays(0.0));
  const Extremal& e = r.extremal;
  EXPECT_NEAR(e.t_f, 1.0, 1e-8);
  EXPECT_EQ(e.p0, -1.0);
  EXPECT_LT(sup_distance([&](double t) { return e.x.eval(t); }, [](double t) { return vec({t, 0.0}); }, e.t_f), 1e-6);
  EXPECT_LT(sup_distance([&](double t) { return e.p.eval(t); }, [](double) { return vec({1.0, 0.0}); }, e.t_f), 1e-6);
  EXPECT_LT(sup_distance([&](double t) { return e.u.eval(t); }, [](double) { return vec({0.0, 0.0}); }, e.t_f), 1e-6);
  EXPECT_TRUE(e.singular);
}

TEST(Solve, StateLagOnlyInTimeArgumentMatchesClassicalLq) {
  const LqData d = default_delayed_lq();
  const OcpProblem prob = build_delayed_lq(d);
  const oracle::ClassicalLq truth(d);
  for (double tau0 : {0.0, 0.3}) {
    const SolveResult r = solve_builtin(prob, DelayVector(tau0, 0, 0, 1));
    const Extremal& e = r.extremal;
    EXPECT_LT(sup_distance([&](double t) { return e.x.eval(t); }, [&](double t) { return truth.state(t); }, 1.0), 1e-8);
    EXPECT_LT(sup_distance([&](double t) { return e.p.eval(t); }, [&](double t) { return truth.costate(t); }, 1.0), 1e-8);
    EXPECT_LT((r.unknowns.p_init - truth.costate(0.0)).norm(), 1e-8) << tau0;
  }
}

TEST(Solve, DelayedLqMatchesCollocation) {
  const LqData d = default_delayed_lq();
  const OcpProblem prob = build_delayed_lq(d);
  const SolveResult r = solve_builtin(prob, DelayVector(0, 0.2, 0, 1));
  const auto c = oracle::delayed_lq(d.A, d.Ad, d.B, d.Bd, d.K1, d.K2, d.K3, d.K4, d.x0, 1.0, 0.2, 0.0, 400);
  double ex = 0, eu = 0;
  for (int k = 0; k <= c.cells(); ++k) {
    const double t = c.node(k);
    ex = std::max(ex, (r.extremal.x.eval(t) - c.x.col(k)).lpNorm<Eigen::Infinity>());
    eu = std::max(eu, (r.extremal.u.eval(t) - c.u_from_costate.col(k)).lpNorm<Eigen::Infinity>());
  }
  EXPECT_LT(ex, 1e-4);
  EXPECT_LT(eu, 1e-4);
}

TEST(Solve, OutputPassesItsOwnReport) {
  const OcpProblem prob = build_delayed_lq(default_delayed_lq());
  const SolveConfig cfg;
  for (const DelayVector& tau : {DelayVector(0, 0.2, 0, 1), DelayVector(0, 0, 0.2, 1)}) {
    const SolveResult r = solve_builtin(prob, tau);
    EXPECT_TRUE(report_within(r.report, cfg));
    EXPECT_EQ(r.mode, ShootingMode::backward_seed);
    ASSERT_FALSE(r.trace.last_sweep_defects.empty());
    for (double v : r.trace.last_sweep_defects) EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(r.trace.last_sweep_defects.back(), cfg.sweep.tol_fixed_point);
    const ResidualReport again = residual_report(prob, r.extremal, cfg.sweep.integrator, cfg.report_lattice);
    EXPECT_DOUBLE_EQ(again.max(), r.report.max());
  }
}

TEST(Solve, DoubleIntegratorSwitchesHalfway) {
  const OcpProblem prob = build_double_integrator(1.0);
  const SolveResult r = solve_builtin(prob, DelayVector());
  EXPECT_NEAR(r.extremal.t_f, 2.0, 1e-3);
  EXPECT_NEAR(r.extremal.u.eval(0.5)[0], -1.0, 1e-12);
  EXPECT_NEAR(r.extremal.u.eval(1.5)[0], 1.0, 1e-12);
  EXPECT_LT(r.report.free_time_defect, 1e-6);
}

TEST(Solve, ResidualAtSolutionIsBelowNewtonTolerance) {
  const OcpProblem prob = build_delayed_lq(default_delayed_lq());
  const SolveResult r = solve_builtin(prob, DelayVector(0, 0.2, 0, 1));
  EXPECT_LT(r.trace.residual_norms.back(), SolveConfig{}.tol_newton);
  for (std::size_t i = 1; i < r.trace.residual_norms.size(); ++i)
    EXPECT_LT(r.trace.residual_norms[i], r.trace.residual_norms[i - 1]);
}

TEST(Solve, FreeTimeWithControlDelayRejected) {
  const OcpProblem prob = build_double_integrator(1.0);
  EXPECT_THROW(solve(prob, DelayVector(0, 0, 0.1, 1), builtin_guess(prob), std::nullopt, {}), ConfigError);
}

TEST(Solve, NonFiniteGuessRejected) {
  const OcpProblem prob = build_delayed_lq(default_delayed_lq());
  ShootingUnknowns g{vec({std::nan(""), 0.0}), std::nullopt};
  EXPECT_THROW(solve(prob, DelayVector(), g, std::nullopt, {}), ConfigError);
}

TEST(Solve, IterationCapRaisesNewtonStalled) {
  const OcpProblem prob = build_counterexample(10.0);
  SolveConfig cfg = builtin_solve_config(prob, counterexample_delays(0.0));
  cfg.max_newton = 0;
  EXPECT_THROW(solve(prob, counterexample_delays(0.0), builtin_guess(prob), std::nullopt, cfg), NewtonStalled);
}

TEST(Solve, ForwardShootingRejectsCoupledDelays) {
  const OcpProblem prob = build_delayed_lq(default_delayed_lq());
  SolveConfig fwd;
  fwd.mode = ShootingMode::forward;
  EXPECT_THROW(solve(prob, DelayVector(0, 0.2, 0, 1), builtin_guess(prob), std::nullopt, fwd), ConfigError);
}

TEST(Solve, SingleAndMultipleShootingAgree) {
  const OcpProblem prob = build_double_integrator(1.0);
  SolveConfig one;
  one.segments = 1;
  const SolveResult a = solve(prob, DelayVector(), builtin_guess(prob), std::nullopt, one);
  const SolveResult b = solve_builtin(prob, DelayVector());
  EXPECT_NEAR(a.extremal.t_f, b.extremal.t_f, 1e-8);
  EXPECT_LT((a.unknowns.p_init - b.unknowns.p_init).norm(), 1e-6);
}

}  // namespace
}  // namespace dpmp
