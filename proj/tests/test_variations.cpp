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
#include <limits>

#include "dpmp/presets.hpp"
#include "dpmp/problems.hpp"
#include "dpmp/solver.hpp"
#include "dpmp/variations.hpp"
#include "oracles/counterexample.hpp"
#include "support.hpp"

namespace dpmp {
namespace {

using testing::vec;

const std::vector<double> kLadder = {1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4};

struct Solved {
  OcpProblem prob;
  Extremal ext;
};

Solved solved(const OcpProblem& prob, const DelayVector& tau) {
  return {prob, solve(prob, tau, builtin_guess(prob), std::nullopt, builtin_solve_config(prob, tau)).extremal};
}

const Solved& lq_state() {
  static const Solved s = solved(build_delayed_lq(default_delayed_lq()), DelayVector(0, 0.2, 0, 1));
  return s;
}

const Solved& lq_control() {
  static const Solved s = solved(build_delayed_lq(default_delayed_lq()), DelayVector(0, 0, 0.2, 1));
  return s;
}

const Solved& double_integrator() {
  static const Solved s = solved(build_double_integrator(1.0), DelayVector());
  return s;
}

TEST(Omega, StoredControlGivesZero) {
  for (const Solved* s : {&lq_state(), &lq_control()}) {
    for (double t : {0.1, 0.45, 0.9}) {
      const auto [om, op] = omega_vectors(s->prob, s->ext.tau, s->ext, t, s->ext.u.eval(t));
      EXPECT_LT(om.norm(), 1e-14);
      EXPECT_LT(op.norm(), 1e-14);
    }
  }
}

TEST(Omega, UndelayedCounterexampleClosedForm) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  // f = (1 - x2^2, u1) and unit cost at tau = 0, x2 = 0, u = 0.
  auto [a, ap] = omega_vectors(prob, e.tau, e, 0.4, vec({1.0, 0.0}));
  EXPECT_LT((a - vec({0.0, 1.0, 0.0})).norm(), 1e-15);
  EXPECT_EQ(ap, Vec::Zero(3));
  auto [b, bp] = omega_vectors(prob, e.tau, e, 0.4, vec({0.0, 1.0}));
  EXPECT_EQ(b, Vec::Zero(3));
}

TEST(Omega, LaggedSlotShowsUpOneDelayLater) {
  const Solved& s = lq_control();
  const Vec z = vec({2.0});
  const auto [om, op] = omega_vectors(s.prob, s.ext.tau, s.ext, 0.3, z);
  const double du = z[0] - s.ext.u.eval(0.3)[0];
  // x' = ... + B u + Bd u(t - tau2); B = (0, 1), Bd = (0, 0.5).
  EXPECT_NEAR(om[1], du, 1e-12);
  EXPECT_NEAR(op[1], 0.5 * du, 1e-12);
  const auto [om2, op2] = omega_vectors(s.prob, s.ext.tau, s.ext, 0.9, z);
  EXPECT_EQ(op2, Vec::Zero(3));
  EXPECT_THROW(omega_vectors(s.prob, s.ext.tau, s.ext, 0.0, z), OutOfDomain);
}

TEST(VariationVector, ConstantAlongUndelayedCounterexample) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  const Vec xi = vec({0.3, 1.0, -0.2});
  EXPECT_LT((variation_vector(prob, e.tau, e, 0.25, xi, 1.0) - xi).norm(), 1e-14);
}

TEST(VariationVector, LinearInInitialValue) {
  const Solved& s = lq_state();
  const Vec a = vec({1.0, -0.5, 0.2}), b = vec({0.3, 0.7, -1.0});
  const Vec va = variation_vector(s.prob, s.ext.tau, s.ext, 0.35, a, 1.0);
  const Vec vb = variation_vector(s.prob, s.ext.tau, s.ext, 0.35, b, 1.0);
  const Vec vab = variation_vector(s.prob, s.ext.tau, s.ext, 0.35, Vec(2.0 * a - 3.0 * b), 1.0);
  EXPECT_LT((vab - (2.0 * va - 3.0 * vb)).norm(), 1e-10);
}

TEST(VariationVector, MatchesUndelayedLinearFlow) {
  // With tau = 0 the state part is exp((A + Ad)(1 - s)) xi; fine Euler here.
  const Solved s = solved(build_delayed_lq(default_delayed_lq()), DelayVector());
  const LqData d = default_delayed_lq();
  const Mat A = d.A + d.Ad;
  const Vec xi = vec({1.0, 0.0, 0.0});
  const Vec v = variation_vector(s.prob, s.ext.tau, s.ext, 0.5, xi, 1.0);
  Vec z = xi.head(2);
  const int N = 20000;
  for (int k = 0; k < N; ++k) z += (0.5 / N) * A * z;
  EXPECT_LT((v.head(2) - z).norm(), 1e-4);
}

TEST(VariationVector, RejectsBadArguments) {
  const Solved& s = lq_state();
  EXPECT_THROW(variation_vector(s.prob, s.ext.tau, s.ext, 0.3, vec({1.0, 0.0}), 1.0), DimensionMismatch);
  EXPECT_THROW(variation_vector(s.prob, s.ext.tau, s.ext, 0.8, vec({1.0, 0.0, 0.0}), 0.5), OutOfDomain);
}

TEST(Needle, NoOpNeedleHasZeroRemainder) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  const NeedleReport r = needle_endpoint_check(prob, e.tau, e, {{0.5}, {1.0}, {vec({0.0, 0.0})}, 0.0}, kLadder);
  EXPECT_LT(r.first_order.norm(), 1e-15);
  for (double v : r.remainder) EXPECT_LT(v, 1e-14);
}

TEST(Needle, UndelayedCounterexampleRemainderIsSecondOrder) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  const NeedleReport r = needle_endpoint_check(prob, e.tau, e, {{0.5}, {1.0}, {vec({1.0, 0.0})}, 0.0}, kLadder);
  EXPECT_LT((r.first_order - vec({0.0, 1.0, 0.0})).norm(), 1e-12);
  EXPECT_GE(r.slope, 1.5);
}

TEST(Needle, DelayedLqRemainderIsSecondOrder) {
  for (const Solved* s : {&lq_state(), &lq_control()}) {
    const double t = quiet_needle_time(s->ext.tau, s->ext, 1e-2);
    const NeedleReport r = needle_endpoint_check(s->prob, s->ext.tau, s->ext, {{t}, {1.0}, {vec({2.0})}, 0.0}, kLadder);
    EXPECT_GE(r.slope, 1.5) << t;
    EXPECT_GT(r.first_order.norm(), 1e-3);
  }
}

TEST(Needle, TimeShiftRemainderIsSecondOrder) {
  for (const Solved* s : {&lq_state(), &lq_control(), &double_integrator()})
    EXPECT_GE(time_shift_check(s->prob, s->ext.tau, s->ext, kLadder).slope, 1.5) << s->prob.name();
}

TEST(Needle, ValueWithLargestEffectAvoidsInertSlots) {
  const OcpProblem prob = build_counterexample(10.0);
  const Extremal e = oracle::counterexample_truth(prob);
  // At tau = 0 only u1 moves the state; the chosen value must use it fully.
  const Vec z = needle_value_for(prob, e.tau, e, 0.5);
  EXPECT_NEAR(std::abs(z[0]), 1.0, 1e-12);
}

TEST(Needle, SpecValidation) {
  const Solved& s = lq_state();
  const auto& e = s.ext;
  auto check = [&](NeedleSpec sp) { return needle_endpoint_check(s.prob, e.tau, e, sp, kLadder); };
  EXPECT_THROW(check({{0.5}, {}, {vec({0.0})}, 0.0}), ConfigError);
  EXPECT_THROW(check({{1.5}, {1.0}, {vec({0.0})}, 0.0}), ConfigError);
  EXPECT_THROW(check({{0.5}, {-1.0}, {vec({0.0})}, 0.0}), ConfigError);
  EXPECT_THROW(check({{0.5}, {1.0}, {vec({50.0})}, 0.0}), ConfigError);
  EXPECT_THROW(check({{0.4}, {1.0}, {vec({0.0})}, 0.0}), ConfigError);  // breakpoint 2 tau1
  EXPECT_THROW(check({{0.5, 0.5}, {1.0, 1.0}, {vec({0.0}), vec({0.0})}, 0.0}), ConfigError);
  EXPECT_THROW(needle_endpoint_check(s.prob, e.tau, e, {{0.5}, {1.0}, {vec({0.0})}, 0.0}, {1e-3}), ConfigError);
}

TEST(LogLogSlope, RecoversPowerLaw) {
  std::vector<double> x, y;
  for (double t : {1e-3, 1e-2, 1e-1}) {
    x.push_back(t);
    y.push_back(3.0 * t * t);
  }
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
}

TEST(DelayBreakpoints, SumsOfDelays) {
  const auto b = delay_breakpoints(DelayVector(0, 0.3, 0.4, 1), 1.0);
  std::vector<double> want = {0.4, 0.8, 0.3, 0.7, 0.6, 0.9};
  ASSERT_EQ(b.size(), want.size());
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b[i], want[i], 1e-15);
  EXPECT_TRUE(delay_breakpoints(DelayVector(0.5, 0, 0, 1), 1.0).empty());
}

TEST(Cone, EmptySampleGivesMinusInfinity) {
  const Solved& s = lq_state();
  const ConeSample c = cone_sample(s.prob, s.ext.tau, s.ext, {}, false);
  EXPECT_EQ(multiplier_check(s.ext, c), -std::numeric_limits<double>::infinity());
}

TEST(Cone, PairCountIsTimesByLattice) {
  const Solved& s = lq_state();
  const auto pairs = cone_pairs(s.prob, s.ext.tau, s.ext, 20, 5);
  EXPECT_EQ(pairs.size(), 100u);
  const auto b = delay_breakpoints(s.ext.tau, s.ext.t_f);
  const double h = s.ext.u.body().grid().step();
  for (const auto& [t, z] : pairs)
    for (double x : b) EXPECT_GT(std::abs(t - x), 2 * h);
}

TEST(Cone, ExtremalsSeparateTheCone) {
  for (const Solved* s : {&lq_state(), &lq_control(), &double_integrator()}) {
    const bool free = s->prob.final_time().is_free();
    const ConeSample c = cone_sample(s->prob, s->ext.tau, s->ext, cone_pairs(s->prob, s->ext.tau, s->ext, 20, 5), free);
    EXPECT_GE(c.vectors.size(), 100u);
    EXPECT_LE(multiplier_check(s->ext, c), 1e-6) << s->prob.name();
    if (free) EXPECT_LE(std::abs(endpoint_pairing(s->prob, s->ext)), 1e-6);
  }
}

TEST(Cone, FlippedCostateIsCaught) {
  const Solved& s = double_integrator();
  Extremal e = s.ext;
  e.p = SampledFunction(e.p.grid(), Mat(-e.p.values()), Interp::linear);
  const ConeSample c = cone_sample(s.prob, e.tau, e, cone_pairs(s.prob, e.tau, e, 20, 5), true);
  EXPECT_GT(multiplier_check(e, c), 1e-2);
}

TEST(Cone, AugmentedSampleAddsBothTimeDirections) {
  const Solved& s = double_integrator();
  const ConeSample c = cone_sample(s.prob, s.ext.tau, s.ext, {}, true);
  ASSERT_EQ(c.vectors.size(), 2u);
  EXPECT_EQ(c.vectors[0], Vec(-c.vectors[1]));
  EXPECT_EQ(c.provenance[0].second.size(), 0);
}

TEST(Cone, VariationVectorsMoveContinuouslyInTime) {
  const Solved& s = lq_control();
  const Vec z = vec({1.0});
  const auto a = cone_sample(s.prob, s.ext.tau, s.ext, {{0.5, z}}, false).vectors[0];
  const auto b = cone_sample(s.prob, s.ext.tau, s.ext, {{0.5 + 1e-3, z}}, false).vectors[0];
  EXPECT_LT((a - b).norm(), 1e-2 * a.norm());
}

}  // namespace
}  // namespace dpmp
