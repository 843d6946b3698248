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

// Starting guesses and solver settings for the built-in problems.

#ifndef DPMP_PRESETS_HPP
#define DPMP_PRESETS_HPP

#include <cmath>
#include <string>

#include "dpmp/ocp.hpp"
#include "dpmp/solver.hpp"

namespace dpmp {

/// Shooting unknowns for a cold start of a built-in problem at tau = 0.
inline ShootingUnknowns builtin_guess(const OcpProblem& prob) {
  ShootingUnknowns u;
  u.p_init = Vec::Zero(prob.n());
  const std::string& name = prob.name();
  if (name == "counterexample") {
    u.p_init << 0.8, 0.0;
    u.t_f = 0.9;
  } else if (name == "double-integrator") {
    // The switch time is quantized to the mesh; start on the exact switch.
    const double x0 = prob.history_state().eval(0.0)[0];
    const double T = 2.0 * std::sqrt(std::abs(x0));
    const double sg = x0 >= 0 ? 1.0 : -1.0;
    u.p_init << -sg * 2.0 / T, -1.0 * sg;
    u.t_f = T;
  } else if (prob.final_time().is_free()) {
    u.t_f = prob.final_time().t_f;
  }
  return u;
}

/// Settings used for a problem at delay tau. For the counterexample with
/// tau > 0 the control turns through a half circle inside windows far below
/// the mesh width, so the adjoint and maximality checks get looser bounds.
/// At tau = 0 the counterexample is solved by single shooting.
inline SolveConfig builtin_solve_config(const OcpProblem& prob, const DelayVector& tau, SolveConfig cfg = {}) {
  if (prob.name() != "counterexample") return cfg;
  if (tau.tau0 == 0.0 && tau.tau1 == 0.0 && tau.tau2 == 0.0) {
    cfg.segments = 1;
  } else {
    cfg.tol_adjoint = std::max(cfg.tol_adjoint, 5e-4);
    cfg.tol_maximality = std::max(cfg.tol_maximality, 1e-5);
  }
  return cfg;
}

}  // namespace dpmp

#endif  // DPMP_PRESETS_HPP
