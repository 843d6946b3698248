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

#ifndef DPMP_TESTS_SUPPORT_HPP
#define DPMP_TESTS_SUPPORT_HPP

#include "dpmp/ocp.hpp"
#include "dpmp/problems.hpp"

namespace dpmp::testing {

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// Scalar-state, scalar-control problem with finite-difference Jacobians,
/// constant histories x0 and 0, box [-bound, bound], free endpoint.
inline OcpProblem scalar_problem(DynamicsFn f, CostFn c, double x0 = 1.0, double t_f = 1.0,
                                 double delta = 1.0, double bound = 10.0) {
  OcpDefinition d;
  d.name = "scalar";
  d.state_dim = 1;
  d.control_dim = 1;
  d.dynamics = std::move(f);
  d.running_cost = std::move(c);
  d.control_set = ControlSet::box(Vec::Constant(1, -bound), Vec::Constant(1, bound));
  d.target = Target::free(1);
  d.history_state = constant_history(Vec::Constant(1, x0), delta, Interp::linear);
  d.history_control = constant_history(Vec::Zero(1), delta, Interp::piecewise_constant);
  d.final_time = FinalTime::fixed(t_f);
  return OcpProblem(std::move(d));
}

inline double zero_cost(double, double, const Vec&, const Vec&, const Vec&, const Vec&) { return 0.0; }

}  // namespace dpmp::testing

#endif  // DPMP_TESTS_SUPPORT_HPP
