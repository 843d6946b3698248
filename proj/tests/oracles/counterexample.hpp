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

// Hand-derived facts about the oscillating minimum-time family, kept apart
// from the library so tests compare two independent routes.

#ifndef DPMP_TESTS_ORACLES_COUNTEREXAMPLE_HPP
#define DPMP_TESTS_ORACLES_COUNTEREXAMPLE_HPP

#include <cmath>
#include <numbers>

#include "dpmp/integrator.hpp"
#include "dpmp/pmp.hpp"
#include "dpmp/problems.hpp"

namespace oracle {

/// Unit-ball maximizer of <p, f> with g = cos(2 pi K x1), h = sin(2 pi K x1):
///   u1 = p2 / sqrt(phi), u2 = tau (p1 g + p2 h) / sqrt(phi),
///   phi = p2^2 + tau^2 (p1 g + p2 h)^2.
struct ClosedFormControl {
  double u1 = 0, u2 = 0, phi = 0;
};

inline ClosedFormControl counterexample_control(double K, double tau, double x1, double p1, double p2) {
  const double a = 2.0 * std::numbers::pi * K * x1;
  const double q = p1 * std::cos(a) + p2 * std::sin(a);
  ClosedFormControl c;
  c.phi = p2 * p2 + tau * tau * q * q;
  c.u1 = p2 / std::sqrt(c.phi);
  c.u2 = tau * q / std::sqrt(c.phi);
  return c;
}

/// x = (t, 0), p = (1, 0), p0 = -1, u = 0, t_f = 1 on a grid of `steps` cells.
inline dpmp::Extremal counterexample_truth(const dpmp::OcpProblem& prob, std::size_t steps = 1000) {
  using dpmp::Vec;
  const dpmp::TimeGrid g(0.0, 1.0, steps);
  dpmp::Extremal e;
  e.x = dpmp::Trajectory(prob.history_state(),
                         dpmp::SampledFunction::sample(g, [](double t) { return Vec(Vec::Unit(2, 0) * t); },
                                                       dpmp::Interp::linear));
  e.p = dpmp::SampledFunction::constant(g, Vec::Unit(2, 0), dpmp::Interp::linear);
  e.u = dpmp::control_trajectory(
      prob, dpmp::SampledFunction::constant(dpmp::TimeGrid(0.0, 1.0, 2 * steps), Vec::Zero(2), dpmp::Interp::linear));
  e.p0 = -1.0;
  e.t_f = 1.0;
  e.tau = dpmp::counterexample_delays(0.0);
  return e;
}

}  // namespace oracle

#endif  // DPMP_TESTS_ORACLES_COUNTEREXAMPLE_HPP
