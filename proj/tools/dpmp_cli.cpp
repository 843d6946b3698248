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

// dpmp: solve, homotopy, needle-check, cone-check and weak-strong drivers.
//
// Exit codes: 0 success, 1 configuration or input error, 2 solver failure,
// 3 homotopy stuck (partial path written), 4 a check did not pass.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dpmp/errors.hpp"
#include "dpmp/homotopy.hpp"
#include "dpmp/io.hpp"
#include "dpmp/presets.hpp"
#include "dpmp/problems.hpp"
#include "dpmp/solver.hpp"
#include "dpmp/variations.hpp"

namespace fs = std::filesystem;
using namespace dpmp;

namespace {

enum Exit { ok = 0, config_error = 1, solver_failure = 2, stuck = 3, check_failed = 4 };

struct Options {
  std::string problem;
  std::vector<double> tau = {0.0, 0.0, 0.0};
  bool free_time = false;
  std::string out = "out";
  double mesh_h = 0.0;
  std::optional<double> oscillation_K;
  double delta = 1.0;
  std::string path_mode = "joint";
  double initial_step = 0.25;
  double min_step = 1.0 / 1024.0;
  std::optional<double> tol_adjoint;
  std::optional<double> tol_maximality;
  std::size_t segments = 0;
  std::optional<int> max_newton;

  std::string extremal;
  std::vector<double> eta = {1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4};
  std::optional<double> needle_time;
  std::vector<double> needle_value;
  int cone_times = 20;
  int cone_lattice = 5;
  double tolerance = 1e-6;
  double min_slope = 1.5;
  std::vector<double> ladder = {0.1, 0.05, 0.025};
  int test_set_size = 4;
};

OcpProblem make_problem(const Options& o) {
  if (o.problem.empty()) throw ConfigError("missing required key 'problem' (--problem NAME)");
  std::map<std::string, double> params = {{"delta", o.delta}};
  if (o.oscillation_K) params["oscillation_K"] = *o.oscillation_K;
  if (o.free_time) params["free_time"] = 1.0;
  return make_builtin(o.problem, params);
}

DelayVector delays(const Options& o) {
  if (o.tau.size() != 3) throw ConfigError("--tau takes three values");
  return DelayVector(o.tau[0], o.tau[1], o.tau[2], o.delta);
}

SolveConfig solve_config(const OcpProblem& prob, const DelayVector& tau, const Options& o) {
  SolveConfig c;
  if (o.mesh_h > 0) c.sweep.integrator.h = o.mesh_h;
  if (o.segments > 0) c.segments = o.segments;
  if (o.max_newton) c.max_newton = *o.max_newton;
  c = builtin_solve_config(prob, tau, c);
  if (o.tol_adjoint) c.tol_adjoint = *o.tol_adjoint;
  if (o.tol_maximality) c.tol_maximality = *o.tol_maximality;
  c.validate();
  return c;
}

/// Free final time together with a control delay is refused before any work.
void check_setup(const OcpProblem& prob, const DelayVector& tau) {
  const bool free = prob.final_time().is_free();
  if (free && tau.tau2 > 0)
    throw ConfigError("free final time is not supported together with a control delay (tau2 > 0)");
}

bool is_zero(const DelayVector& t) { return t.tau0 == 0.0 && t.tau1 == 0.0 && t.tau2 == 0.0; }

/// Solves at tau from the built-in guess, seeding through tau = 0 when the
/// direct solve fails.
SolveResult solve_at(const OcpProblem& prob, const DelayVector& tau, const Options& o) {
  const DelayVector zero(0.0, 0.0, 0.0, tau.delta);
  if (is_zero(tau)) return solve(prob, tau, builtin_guess(prob), std::nullopt, solve_config(prob, tau, o));
  try {
    return solve(prob, tau, builtin_guess(prob), std::nullopt, solve_config(prob, tau, o));
  } catch (const NewtonStalled&) {
  } catch (const SweepDiverged&) {
  }
  const SolveResult seed = solve(prob, zero, builtin_guess(prob), std::nullopt, solve_config(prob, zero, o));
  const ShootingMode mode = resolve_shooting_mode(tau, ShootingMode::automatic);
  return solve(prob, tau, unknowns_of(prob, seed.extremal, mode), seed.extremal, solve_config(prob, tau, o));
}

Extremal load_or_solve(const OcpProblem& prob, const DelayVector& tau, const Options& o) {
  if (o.extremal.empty()) return solve_at(prob, tau, o).extremal;
  std::ifstream is(o.extremal);
  if (!is) throw ConfigError("cannot open extremal file " + o.extremal);
  return read_extremal_csv(is, prob, tau);
}

int cmd_solve(const Options& o) {
  const OcpProblem prob = make_problem(o);
  const DelayVector tau = delays(o);
  check_setup(prob, tau);
  const SolveResult r = solve_at(prob, tau, o);
  fs::create_directories(o.out);
  write_extremal_csv(fs::path(o.out) / "extremal.csv", prob, r.extremal);
  write_json(fs::path(o.out) / "report.json", to_json(prob, r, solve_config(prob, tau, o)));
  std::cout << "solved " << prob.name() << ": t_f = " << r.extremal.t_f << ", " << describe(r.report) << "\n";
  return ok;
}

HomotopyPolicy policy_for(const OcpProblem& prob, const DelayVector& target, const Options& o) {
  HomotopyPolicy pol;
  pol.initial_step = o.initial_step;
  pol.min_step = o.min_step;
  pol.mode = path_mode_from_string(o.path_mode);
  pol.solve = solve_config(prob, target, o);
  return pol;
}

Extremal seed_for(const OcpProblem& prob, const DelayVector& target, const Options& o) {
  const DelayVector zero(0.0, 0.0, 0.0, target.delta);
  return solve(prob, zero, builtin_guess(prob), std::nullopt, solve_config(prob, zero, o)).extremal;
}

int cmd_homotopy(const Options& o) {
  const OcpProblem prob = make_problem(o);
  const DelayVector target = delays(o);
  check_setup(prob, target);
  const HomotopyPolicy pol = policy_for(prob, target, o);
  const Extremal seed = seed_for(prob, target, o);
  try {
    const HomotopyPath path = continue_to(fixed_family(prob), target, seed, pol);
    write_path(o.out, prob, path, pol.mode, continuity_metrics(path));
    std::cout << "homotopy reached tau = (" << path.target.tau0 << ", " << path.target.tau1 << ", "
              << path.target.tau2 << ") in " << path.accepted().size() << " accepted steps\n";
    return ok;
  } catch (const HomotopyStuck& e) {
    write_path(o.out, prob, e.path(), pol.mode, continuity_metrics(e.path()));
    std::cerr << "dpmp: " << e.what() << "\n";
    return stuck;
  }
}

int cmd_needle(const Options& o) {
  const OcpProblem prob = make_problem(o);
  const DelayVector tau = delays(o);
  check_setup(prob, tau);
  const Extremal ext = load_or_solve(prob, tau, o);
  const double eta_max = *std::max_element(o.eta.begin(), o.eta.end());
  const double t = o.needle_time ? *o.needle_time : quiet_needle_time(tau, ext, eta_max);
  Vec z;
  if (!o.needle_value.empty()) {
    z = Eigen::Map<const Vec>(o.needle_value.data(), static_cast<Eigen::Index>(o.needle_value.size()));
    if (z.size() != prob.m()) throw ConfigError("--needle-value needs one entry per control");
  } else {
    z = needle_value_for(prob, tau, ext, t);
  }
  const NeedleReport needle = needle_endpoint_check(prob, tau, ext, NeedleSpec{{t}, {1.0}, {z}, 0.0}, o.eta);
  const NeedleReport shift = time_shift_check(prob, tau, ext, o.eta);
  const bool pass = needle.slope >= o.min_slope;
  Json j;
  j["problem"] = prob.name();
  j["tau"] = to_json(tau);
  j["needle_time"] = t;
  j["needle_value"] = to_json(z);
  j["min_slope"] = o.min_slope;
  j["needle"] = to_json(needle);
  j["time_shift"] = to_json(shift);
  j["pass"] = pass;
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "needle.json", j);
  std::ofstream csv(fs::path(o.out) / "needle.csv");
  write_needle_csv(csv, needle);
  std::cout << "needle slope " << needle.slope << (pass ? " (pass)" : " (fail)") << "\n";
  return pass ? ok : check_failed;
}

int cmd_cone(const Options& o) {
  const OcpProblem prob = make_problem(o);
  const DelayVector tau = delays(o);
  check_setup(prob, tau);
  const Extremal ext = load_or_solve(prob, tau, o);
  const bool free = prob.final_time().is_free();
  const ConeSample cone = cone_sample(prob, tau, ext, cone_pairs(prob, tau, ext, o.cone_times, o.cone_lattice), free);
  const double pairing = multiplier_check(ext, cone);
  bool pass = pairing <= o.tolerance;
  Json j = to_json(cone, pairing, o.tolerance);
  if (free) {
    const double e = endpoint_pairing(prob, ext);
    j["endpoint_pairing"] = e;
    pass = pass && std::abs(e) <= o.tolerance;
  }
  j["pass"] = pass;
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "cone.json", j);
  std::cout << "max pairing " << pairing << " over " << cone.vectors.size() << " vectors"
            << (pass ? " (pass)" : " (fail)") << "\n";
  return pass ? ok : check_failed;
}

int cmd_weak_strong(const Options& o) {
  Options oo = o;
  if (oo.problem.empty()) oo.problem = "counterexample";
  if (oo.problem != "counterexample") throw ConfigError("weak-strong runs on the counterexample only");
  if (o.ladder.size() < 2) throw ConfigError("weak-strong needs a ladder of at least two delays");
  for (double t : o.ladder)
    if (!(t > 0)) throw ConfigError("weak-strong ladder values must be positive");
  const OcpProblem prob = make_problem(oo);
  std::vector<DelayVector> ladder;
  for (double t : o.ladder) ladder.push_back(counterexample_delays(t, o.delta));
  const DelayVector top = *std::max_element(ladder.begin(), ladder.end(),
                                            [](const DelayVector& a, const DelayVector& b) { return a.tau0 < b.tau0; });
  const HomotopyPolicy pol = policy_for(prob, top, oo);
  const Extremal seed = seed_for(prob, top, oo);
  HomotopyPath path;
  try {
    path = continue_through(fixed_family(prob), ladder, seed, pol);
  } catch (const HomotopyStuck& e) {
    write_path(fs::path(o.out) / "path", prob, e.path(), pol.mode, continuity_metrics(e.path(), o.test_set_size));
    std::cerr << "dpmp: " << e.what() << "\n";
    return stuck;
  }
  const ContinuityReport rep = continuity_metrics(path, o.test_set_size);
  write_path(fs::path(o.out) / "path", prob, path, pol.mode, rep);

  // Rows in the order of the given ladder.
  std::vector<ContinuityRow> rows;
  for (const DelayVector& t : ladder)
    for (const auto& r : rep.rows)
      if (r.tau.tau0 == t.tau0) {
        rows.push_back(r);
        break;
      }
  bool weak_down = true, strong_kept = true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    weak_down = weak_down && rows[k].weak_u < rows[k - 1].weak_u;
    strong_kept = strong_kept && rows[k].strong_u >= 0.5 * rows.front().strong_u;
  }
  const bool pass = weak_down && strong_kept;
  std::ofstream csv(fs::path(o.out) / "weak_strong.csv");
  csv << "tau,weak_u,strong_u\n" << std::setprecision(17);
  for (const auto& r : rows) csv << r.tau.tau0 << ',' << r.weak_u << ',' << r.strong_u << '\n';
  Json j;
  j["oscillation_K"] = prob.parameters().at("oscillation_K");
  j["test_set_size"] = o.test_set_size;
  j["weak_decreasing"] = weak_down;
  j["strong_bounded_below"] = strong_kept;
  j["pass"] = pass;
  write_json(fs::path(o.out) / "weak_strong.json", j);
  for (const auto& r : rows) std::cout << "tau " << r.tau.tau0 << " weak " << r.weak_u << " strong " << r.strong_u << "\n";
  std::cout << (pass ? "weak-strong separation observed\n" : "weak-strong separation not observed\n");
  return pass ? ok : check_failed;
}

void add_common(CLI::App& app, Options& o) {
  app.add_option("--problem", o.problem, "built-in problem name");
  app.add_option("--tau", o.tau, "delays tau0 tau1 tau2")->expected(3);
  app.add_flag("--free-time", o.free_time, "free final time");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--mesh-h", o.mesh_h, "integrator step");
  app.add_option("--oscillation-K", o.oscillation_K, "oscillation parameter of the counterexample");
  app.add_option("--delta", o.delta, "delay bound");
  app.add_option("--path-mode", o.path_mode, "joint, pure-state or control-only");
  app.add_option("--initial-step", o.initial_step, "initial homotopy step");
  app.add_option("--min-step", o.min_step, "smallest homotopy step");
  app.add_option("--tol-adjoint", o.tol_adjoint, "adjoint defect tolerance");
  app.add_option("--tol-maximality", o.tol_maximality, "maximality defect tolerance");
  app.add_option("--segments", o.segments, "shooting segments");
  app.add_option("--max-newton", o.max_newton, "Newton iteration limit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pontryagin extremals of optimal control problems with delays"};
  app.set_config("--config", "", "key-value configuration file; flags override its keys");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  add_common(app, o);

  auto* solve_cmd = app.add_subcommand("solve", "solve at fixed delays");
  auto* homotopy_cmd = app.add_subcommand("homotopy", "continuation from tau = 0 to --tau");
  auto* needle_cmd = app.add_subcommand("needle-check", "needle variation remainder ladder");
  auto* cone_cmd = app.add_subcommand("cone-check", "multiplier pairing on a cone sample");
  auto* ws_cmd = app.add_subcommand("weak-strong", "weak and strong control distances on the counterexample");
  for (auto* c : {needle_cmd, cone_cmd}) c->add_option("--extremal", o.extremal, "extremal CSV instead of a solve");
  needle_cmd->add_option("--eta", o.eta, "needle width ladder");
  needle_cmd->add_option("--needle-time", o.needle_time, "needle time");
  needle_cmd->add_option("--needle-value", o.needle_value, "needle control value");
  needle_cmd->add_option("--min-slope", o.min_slope, "slope needed to pass");
  cone_cmd->add_option("--cone-times", o.cone_times, "sample times");
  cone_cmd->add_option("--cone-lattice", o.cone_lattice, "control lattice points per dimension");
  cone_cmd->add_option("--tolerance", o.tolerance, "pairing tolerance");
  ws_cmd->add_option("--ladder", o.ladder, "delays to compare");
  ws_cmd->add_option("--test-set-size", o.test_set_size, "number of Legendre test functions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return config_error;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(o);
    if (homotopy_cmd->parsed()) return cmd_homotopy(o);
    if (needle_cmd->parsed()) return cmd_needle(o);
    if (cone_cmd->parsed()) return cmd_cone(o);
    if (ws_cmd->parsed()) return cmd_weak_strong(o);
  } catch (const NewtonStalled& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return solver_failure;
  } catch (const SweepDiverged& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return solver_failure;
  } catch (const NonFiniteState& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return solver_failure;
  } catch (const Error& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "dpmp: " << e.what() << "\n";
    return config_error;
  }
  return config_error;
}
