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

#include <random>

#include "dpmp/pmp.hpp"
#include "dpmp/problems.hpp"
#include "oracles/counterexample.hpp"
#include "support.hpp"

namespace dpmp {
namespace {

using testing::vec;

MaximalityContext counterexample_context(double tau, double t, const Vec& x, const Vec& p) {
  MaximalityContext c;
  c.now = {t, t - tau, x, x, Vec(), Vec()};
  c.p = p;
  c.tied = true;
  return c;
}

TEST(Synthesis, CounterexampleMatchesClosedForm) {
  const OcpProblem prob = build_counterexample(10.0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double tau = 0.1 * (d(rng) + 1.0), t = 0.5 * (d(rng) + 1.0);
    const Vec x = vec({d(rng), 0.1 * d(rng)}), p = vec({d(rng), d(rng)});
    const auto want = oracle::counterexample_control(10.0, tau, x[0], p[0], p[1]);
    if (std::sqrt(want.phi) < 1e-6) continue;
    const ControlChoice ch = choose_control(prob, counterexample_context(tau, t, x, p), SynthesisMode::affine_ball, {});
    ASSERT_FALSE(ch.singular);
    EXPECT_NEAR(ch.u.squaredNorm(), 1.0, 1e-12);
    EXPECT_NEAR(ch.u[0], want.u1, 1e-12);
    EXPECT_NEAR(ch.u[1], want.u2, 1e-12);
  }
}

TEST(Synthesis, AutomaticPicksBallLawForCounterexample) {
  EXPECT_EQ(resolve_mode(build_counterexample(10.0), SynthesisMode::automatic), SynthesisMode::affine_ball);
  EXPECT_EQ(resolve_mode(build_delayed_lq(default_delayed_lq()), SynthesisMode::automatic),
            SynthesisMode::quadratic_regularized);
  EXPECT_EQ(resolve_mode(build_double_integrator(), SynthesisMode::automatic), SynthesisMode::affine_box);
}

TEST(Synthesis, VanishingSwitchingFunctionIsSingular) {
  const OcpProblem prob = build_counterexample(10.0);
  const ControlChoice ch =
      choose_control(prob, counterexample_context(0.0, 0.4, vec({0.4, 0.0}), vec({1.0, 0.0})), SynthesisMode::affine_ball, {});
  EXPECT_TRUE(ch.singular);
  EXPECT_EQ(ch.u, Vec::Zero(2));
}

TEST(Synthesis, GridSearchAgreesWithBoxLaw) {
  const OcpProblem prob = build_double_integrator();
  SynthesisOptions opts;
  opts.lattice = 5;
  for (double p2 : {-0.7, 0.3, 2.0}) {
    MaximalityContext c = counterexample_context(0.0, 0.2, vec({0.5, 0.1}), vec({0.4, p2}));
    const Vec box = choose_control(prob, c, SynthesisMode::affine_box, opts).u;
    const Vec grid = choose_control(prob, c, SynthesisMode::grid_search, opts).u;
    EXPECT_NEAR((box - grid).norm(), 0.0, 1e-14) << p2;
    EXPECT_EQ(std::abs(box[0]), 1.0);
  }
}

TEST(Synthesis, ObserverSeesEveryChoice) {
  const OcpProblem prob = build_counterexample(10.0);
  SynthesisOptions opts;
  int calls = 0;
  opts.observer = [&](const MaximalityContext& c, const ControlChoice& ch) {
    ++calls;
    EXPECT_EQ(c.p.size(), 2);
    EXPECT_EQ(ch.u.size(), 2);
  };
  const Extremal e = oracle::counterexample_truth(prob, 50);
  synthesize_control(prob, e.tau, e.x, e.p, e.p0, e.u, e.t_f, TimeGrid(0.0, 1.0, 50), opts);
  EXPECT_EQ(calls, 51);
}

TEST(Residuals, CounterexampleTruthIsAnExtremal) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  IntegratorConfig ic;
  const ResidualReport r = residual_report(prob, e, ic);
  EXPECT_LT(r.adjoint_defect, 1e-14);
  EXPECT_LE(r.maximality_defect, 1e-14);
  EXPECT_LT(r.free_time_defect, 1e-14);
  EXPECT_LT(r.boundary_defect, 1e-14);
  EXPECT_EQ(r.transversality_defect, 0.0);
}

TEST(Residuals, WrongCostateIsDetected) {
  const OcpProblem prob = build_counterexample(10.0);
  Extremal e = oracle::counterexample_truth(prob);
  e.p = SampledFunction::constant(e.p.grid(), vec({1.0, 0.3}), Interp::linear);
  IntegratorConfig ic;
  const ResidualReport r = residual_report(prob, e, ic);
  // p2 = 0.3 makes u1 = 1 strictly better than the stored u = 0.
  EXPECT_GT(r.maximality_defect, 0.2);
  // H(t_f) = p1 - 1 stays 0; the adjoint of x2 grows through -2 x2 p1 = 0.
  EXPECT_LT(r.free_time_defect, 1e-14);
}

TEST(Residuals, FreeTimeResidualOnlyForFreeTime) {
  const OcpProblem lq = build_delayed_lq(default_delayed_lq());
  const Extremal e = oracle::counterexample_truth(build_counterexample(10.0));
  EXPECT_THROW(free_time_residual(lq, e), ConfigError);
}

TEST(ExtremalValidate, RejectsPositiveMultiplierAndTrivialPair) {
  const OcpProblem prob = build_counterexample(10.0);
  Extremal e = oracle::counterexample_truth(prob);
  EXPECT_NO_THROW(e.validate(prob));
  e.p0 = 0.5;
  EXPECT_THROW(e.validate(prob), ConfigError);
  e.p0 = 0.0;
  e.p = SampledFunction::constant(e.p.grid(), Vec::Zero(2), Interp::linear);
  EXPECT_THROW(e.validate(prob), ConfigError);
}

TEST(Maximality, DelayedControlUsesLeadTerm) {
  const OcpProblem prob = build_delayed_lq(default_delayed_lq());
  const DelayVector tau(0, 0, 0.3, 1);
  // Lead only where the advanced indicator is 1.
  const Trajectory u = control_trajectory(prob, SampledFunction::constant(TimeGrid(0, 1, 10), Vec::Zero(prob.m()),
                                                                          Interp::piecewise_constant));
  const Trajectory x(prob.history_state(), SampledFunction::constant(TimeGrid(0, 1, 10), vec({1.0, 0.0}), Interp::linear));
  const SampledFunction p = SampledFunction::constant(TimeGrid(0, 1, 10), vec({0.2, 0.1}), Interp::linear);
  EXPECT_TRUE(context_at(prob, tau, x, p, -1.0, u, 1.0, 0.5).lead.has_value());
  EXPECT_FALSE(context_at(prob, tau, x, p, -1.0, u, 1.0, 0.8).lead.has_value());
  EXPECT_TRUE(context_at(prob, DelayVector(), x, p, -1.0, u, 1.0, 0.5).tied);
}

}  // namespace
}  // namespace dpmp
