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

// JSON and CSV artifacts: extremals, residual reports, homotopy paths,
// continuity tables, cone samples and needle ladders.

#ifndef DPMP_IO_HPP
#define DPMP_IO_HPP

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpmp/errors.hpp"
#include "dpmp/homotopy.hpp"
#include "dpmp/integrator.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/pmp.hpp"
#include "dpmp/solver.hpp"
#include "dpmp/time_mesh.hpp"
#include "dpmp/variations.hpp"

namespace dpmp {

using Json = nlohmann::ordered_json;

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json to_json(const DelayVector& t) { return Json::array({t.tau0, t.tau1, t.tau2}); }

inline Json to_json(const ResidualReport& r) {
  Json j;
  j["adjoint_defect"] = r.adjoint_defect;
  j["maximality_defect"] = r.maximality_defect;
  j["transversality_defect"] = r.transversality_defect;
  j["free_time_defect"] = r.free_time_defect;
  j["boundary_defect"] = r.boundary_defect;
  return j;
}

inline Json to_json(const SolveTrace& tr) {
  Json j;
  j["residual_norms"] = tr.residual_norms;
  j["step_lengths"] = tr.step_lengths;
  j["sweeps"] = tr.sweeps;
  j["last_sweep_defects"] = tr.last_sweep_defects;
  return j;
}

inline Json tolerances_json(const SolveConfig& c) {
  Json j;
  j["newton"] = c.tol_newton;
  j["adjoint"] = c.tol_adjoint;
  j["maximality"] = c.tol_maximality;
  j["transversality"] = c.tol_transversality;
  j["free_time"] = c.tol_free_time;
  j["boundary"] = c.tol_boundary;
  return j;
}

inline Json to_json(const OcpProblem& prob, const SolveResult& r, const SolveConfig& cfg) {
  Json j;
  j["problem"] = prob.name();
  j["parameters"] = prob.parameters();
  j["tau"] = to_json(r.extremal.tau);
  j["t_f"] = r.extremal.t_f;
  j["p0"] = r.extremal.p0;
  j["singular"] = r.extremal.singular;
  j["shooting_mode"] = to_string(r.mode);
  j["mesh_steps"] = r.mesh_steps;
  j["p_init"] = to_json(r.unknowns.p_init);
  j["report"] = to_json(r.report);
  j["tolerances"] = tolerances_json(cfg);
  j["trace"] = to_json(r.trace);
  return j;
}

inline std::vector<std::string> extremal_columns(const OcpProblem& prob) {
  std::vector<std::string> names;
  for (const char* k : {"x", "p"})
    for (Eigen::Index i = 1; i <= prob.n(); ++i) names.push_back(std::string(k) + "_" + std::to_string(i));
  for (Eigen::Index i = 1; i <= prob.m(); ++i) names.push_back("u_" + std::to_string(i));
  return names;
}

/// Columns t, x_1..x_n, p_1..p_n, u_1..u_m on the control mesh.
inline void write_extremal_csv(std::ostream& os, const OcpProblem& prob, const Extremal& e) {
  const TimeGrid& g = e.u.body().grid();
  const Eigen::Index n = prob.n(), m = prob.m();
  Mat v(2 * n + m, static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double t = g.node(k);
    const auto c = static_cast<Eigen::Index>(k);
    v.col(c).head(n) = e.x.eval(t);
    v.col(c).segment(n, n) = e.p.eval(t);
    v.col(c).tail(m) = e.u.body().node_value(k);
  }
  write_csv(os, SampledFunction(g, std::move(v), Interp::linear), extremal_columns(prob));
}

/// Extremal from its CSV; p0 = -1, t_f is the last time, all components
/// linearly interpolated. The state and control histories come from prob.
inline Extremal read_extremal_csv(std::istream& is, const OcpProblem& prob, const DelayVector& tau) {
  std::vector<std::string> names;
  const SampledFunction all = read_csv(is, Interp::linear, &names);
  if (names != extremal_columns(prob)) throw ConfigError("extremal csv: columns do not match the problem");
  if (std::abs(all.t_start()) > 1e-12) throw ConfigError("extremal csv: time must start at 0");
  const Eigen::Index n = prob.n(), m = prob.m();
  const TimeGrid& g = all.grid();
  Extremal e;
  e.x = Trajectory(prob.history_state(), SampledFunction(g, all.values().topRows(n), Interp::linear));
  e.p = SampledFunction(g, all.values().middleRows(n, n), Interp::linear);
  e.u = control_trajectory(prob, SampledFunction(g, all.values().bottomRows(m), Interp::linear));
  e.p0 = -1.0;
  e.t_f = g.t_end();
  e.tau = tau;
  return e;
}

namespace detail {

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot write " + file.string());
  os << text;
  if (!os) throw ConfigError("write failed for " + file.string());
}

inline std::string step_file(std::size_t k) {
  std::ostringstream os;
  os << "step_" << std::setw(3) << std::setfill('0') << k << ".csv";
  return os.str();
}

}  // namespace detail

inline void write_json(const std::filesystem::path& file, const Json& j) { detail::write_text(file, j.dump(2) + "\n"); }

inline void write_extremal_csv(const std::filesystem::path& file, const OcpProblem& prob, const Extremal& e) {
  std::ostringstream os;
  write_extremal_csv(os, prob, e);
  detail::write_text(file, os.str());
}

/// One row per accepted step.
inline void write_continuity_csv(std::ostream& os, const ContinuityReport& rep) {
  os << "step,tau0,tau1,tau2,sup_x,sup_p,dt_f,weak_u,strong_u\n" << std::setprecision(17);
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    os << k << ',' << r.tau.tau0 << ',' << r.tau.tau1 << ',' << r.tau.tau2 << ',' << r.sup_x << ',' << r.sup_p << ','
       << r.dt_f << ',' << r.weak_u << ',' << r.strong_u << '\n';
  }
}

inline Json path_manifest(const HomotopyPath& path, const PathMode mode) {
  Json j;
  j["target"] = to_json(path.target);
  j["mode"] = to_string(mode);
  Json steps = Json::array();
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const auto& s = path.steps[k];
    Json e;
    e["index"] = k;
    e["s"] = s.s;
    e["tau"] = to_json(s.tau);
    e["accepted"] = s.accepted;
    if (s.accepted) {
      e["file"] = detail::step_file(k);
      e["t_f"] = s.extremal.t_f;
      e["singular"] = s.extremal.singular;
      e["newton_iterations"] = s.newton_iterations;
      e["report"] = to_json(s.report);
    } else {
      e["diagnostics"] = s.diagnostics;
    }
    steps.push_back(e);
  }
  j["steps"] = steps;
  return j;
}

/// Directory with step_NNN.csv per accepted step, path.json and
/// continuity.csv.
inline void write_path(const std::filesystem::path& dir, const OcpProblem& prob, const HomotopyPath& path,
                       PathMode mode, const ContinuityReport& rep) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < path.steps.size(); ++k)
    if (path.steps[k].accepted) write_extremal_csv(dir / detail::step_file(k), prob, path.steps[k].extremal);
  write_json(dir / "path.json", path_manifest(path, mode));
  std::ostringstream os;
  write_continuity_csv(os, rep);
  detail::write_text(dir / "continuity.csv", os.str());
}

inline Json to_json(const ConeSample& c, double pairing, double tolerance) {
  Json j;
  j["size"] = c.vectors.size();
  j["max_pairing"] = pairing;
  j["tolerance"] = tolerance;
  j["certified"] = pairing <= tolerance;
  Json v = Json::array();
  for (std::size_t k = 0; k < c.vectors.size(); ++k) {
    Json e;
    e["s"] = c.provenance[k].first;
    e["z"] = to_json(c.provenance[k].second);
    e["w"] = to_json(c.vectors[k]);
    v.push_back(e);
  }
  j["vectors"] = v;
  return j;
}

inline Json to_json(const NeedleReport& r) {
  Json j;
  j["eta"] = r.eta;
  j["remainder"] = r.remainder;
  j["slope"] = r.slope;
  j["first_order"] = to_json(r.first_order);
  return j;
}

inline void write_needle_csv(std::ostream& os, const NeedleReport& r) {
  os << "eta,remainder\n" << std::setprecision(17);
  for (std::size_t k = 0; k < r.eta.size(); ++k) os << r.eta[k] << ',' << r.remainder[k] << '\n';
}

}  // namespace dpmp

#endif  // DPMP_IO_HPP
