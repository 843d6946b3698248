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

// Built-in problems: the weak/strong counterexample, the delayed
// linear-quadratic family, and a minimum-time double integrator.

#ifndef DPMP_PROBLEMS_HPP
#define DPMP_PROBLEMS_HPP

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

struct ScalarFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

inline SampledFunction constant_history(const Vec& c, double delta, Interp interp) {
  return SampledFunction::constant(TimeGrid(-delta, 0.0, 1), c, interp);
}

/// Counterexample family, minimum time with unit-ball controls:
///   x1' = 1 - x2^2 + (t - s) u2 g(x1),   x2' = u1 + (t - s) u2 h(x1),
///   x(0) = 0, x(t_f) = (1, 0), final time free.
/// The delay enters only through s = t - tau0, so the family is evaluated at
/// DelayVector{tau, 0, 0}.
inline OcpProblem build_counterexample(ScalarFunction g, ScalarFunction h, double delta = 1.0,
                                       std::map<std::string, double> params = {}) {
  OcpDefinition d;
  d.name = "counterexample";
  d.parameters = std::move(params);
  d.state_dim = 2;
  d.control_dim = 2;
  d.dynamics = [g, h](double t, double s, const Vec& x, const Vec&, const Vec& u, const Vec&) {
    const double lag = t - s;
    Vec r(2);
    r << 1.0 - x[1] * x[1] + lag * u[1] * g.value(x[0]), u[0] + lag * u[1] * h.value(x[0]);
    return r;
  };
  d.running_cost = [](double, double, const Vec&, const Vec&, const Vec&, const Vec&) { return 1.0; };
  d.jac_x = [g, h](double t, double s, const Vec& x, const Vec&, const Vec& u, const Vec&) {
    const double lag = t - s;
    Mat J = Mat::Zero(3, 2);
    J(0, 0) = lag * u[1] * g.derivative(x[0]);
    J(0, 1) = -2.0 * x[1];
    J(1, 0) = lag * u[1] * h.derivative(x[0]);
    return J;
  };
  d.jac_y = [](double, double, const Vec&, const Vec&, const Vec&, const Vec&) {
    return Mat(Mat::Zero(3, 2));
  };
  d.jac_u = [g, h](double t, double s, const Vec& x, const Vec&, const Vec&, const Vec&) {
    const double lag = t - s;
    Mat J = Mat::Zero(3, 2);
    J(0, 1) = lag * g.value(x[0]);
    J(1, 0) = 1.0;
    J(1, 1) = lag * h.value(x[0]);
    return J;
  };
  d.jac_v = [](double, double, const Vec&, const Vec&, const Vec&, const Vec&) {
    return Mat(Mat::Zero(3, 2));
  };
  d.control_set = ControlSet::ball(2, 1.0);
  d.target = Target::point(Vec::Unit(2, 0));
  d.history_state = constant_history(Vec::Zero(2), delta, Interp::linear);
  d.history_control = constant_history(Vec::Zero(2), delta, Interp::piecewise_constant);
  d.final_time = FinalTime::free(1.0);

  AffineStructure a;
  a.drift = [](double, double, const Vec& x, const Vec&) {
    Vec r(2);
    r << 1.0 - x[1] * x[1], 0.0;
    return r;
  };
  a.f1 = [g, h](double t, double s, const Vec& x, const Vec&) {
    Mat F(2, 2);
    F << 0.0, (t - s) * g.value(x[0]), 1.0, (t - s) * h.value(x[0]);
    return F;
  };
  a.f2 = [](double, double, const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
  a.cost_drift = [](double, double, const Vec&, const Vec&) { return 1.0; };
  d.affine = a;
  return OcpProblem(std::move(d));
}

/// g(x) = cos(2 pi K x), h(x) = sin(2 pi K x); K = 0 gives g = 1, h = 0.
inline OcpProblem build_counterexample(double oscillation_K, double delta = 1.0) {
  const double w = 2.0 * std::numbers::pi * oscillation_K;
  ScalarFunction g{[w](double x) { return std::cos(w * x); },
                   [w](double x) { return -w * std::sin(w * x); }};
  ScalarFunction h{[w](double x) { return std::sin(w * x); },
                   [w](double x) { return w * std::cos(w * x); }};
  return build_counterexample(g, h, delta, {{"oscillation_K", oscillation_K}, {"delta", delta}});
}

inline DelayVector counterexample_delays(double tau, double delta = 1.0) {
  return DelayVector(tau, 0.0, 0.0, delta);
}

/// Data of the delayed linear-quadratic family
///   x' = A x + Ad x(t - tau1) + B u + Bd u(t - tau2),
///   cost  int K1|x|^2 + K2|x(t-tau1)|^2 + K3|u|^2 + K4|u(t-tau2)|^2,
/// fixed final time, free endpoint, constant histories x0 and 0.
struct LqData {
  Mat A, Ad, B, Bd;
  double K1 = 1.0, K2 = 0.0, K3 = 1.0, K4 = 0.0;
  Vec x0;
  double t_f = 1.0;
  /// Half-width of the box control set; large values keep it inactive.
  double control_bound = 10.0;
  double delta = 1.0;
  bool free_time = false;
};

/// Two-state delayed oscillator used by the experiments.
inline LqData default_delayed_lq() {
  LqData d;
  d.A = Mat(2, 2);
  d.A << 0.0, 1.0, 0.0, 0.0;
  d.Ad = Mat(2, 2);
  d.Ad << 0.0, 0.0, -1.0, -0.5;
  d.B = Mat(2, 1);
  d.B << 0.0, 1.0;
  d.Bd = Mat(2, 1);
  d.Bd << 0.0, 0.5;
  d.K1 = 1.0;
  d.K2 = 0.5;
  d.K3 = 1.0;
  d.K4 = 0.5;
  d.x0 = Vec(2);
  d.x0 << 1.0, 0.0;
  d.t_f = 1.0;
  return d;
}

inline OcpProblem build_delayed_lq(const LqData& lq, std::string name = "delayed-lq") {
  const Eigen::Index n = lq.A.rows(), m = lq.B.cols();
  if (lq.A.cols() != n || lq.Ad.rows() != n || lq.Ad.cols() != n || lq.B.rows() != n ||
      lq.Bd.rows() != n || lq.Bd.cols() != m || lq.x0.size() != n)
    throw DimensionMismatch("build_delayed_lq: inconsistent matrix sizes");
  if (!(lq.K3 > 0)) throw ConfigError("build_delayed_lq: K3 must be positive (coercive in u)");
  if (lq.K1 < 0 || lq.K2 < 0 || lq.K4 < 0) throw ConfigError("build_delayed_lq: weights must be nonnegative");

  OcpDefinition d;
  d.name = std::move(name);
  d.parameters = {{"t_f", lq.t_f}, {"delta", lq.delta}};
  d.state_dim = n;
  d.control_dim = m;
  const Mat A = lq.A, Ad = lq.Ad, B = lq.B, Bd = lq.Bd;
  const double K1 = lq.K1, K2 = lq.K2, K3 = lq.K3, K4 = lq.K4;
  d.dynamics = [=](double, double, const Vec& x, const Vec& y, const Vec& u, const Vec& v) {
    return Vec(A * x + Ad * y + B * u + Bd * v);
  };
  d.running_cost = [=](double, double, const Vec& x, const Vec& y, const Vec& u, const Vec& v) {
    return K1 * x.squaredNorm() + K2 * y.squaredNorm() + K3 * u.squaredNorm() + K4 * v.squaredNorm();
  };
  auto stack = [](const Mat& top, const Vec& last) {
    Mat J(top.rows() + 1, top.cols());
    J.topRows(top.rows()) = top;
    J.row(top.rows()) = last.transpose();
    return J;
  };
  d.jac_x = [=](double, double, const Vec& x, const Vec&, const Vec&, const Vec&) { return stack(A, 2 * K1 * x); };
  d.jac_y = [=](double, double, const Vec&, const Vec& y, const Vec&, const Vec&) { return stack(Ad, 2 * K2 * y); };
  d.jac_u = [=](double, double, const Vec&, const Vec&, const Vec& u, const Vec&) { return stack(B, 2 * K3 * u); };
  d.jac_v = [=](double, double, const Vec&, const Vec&, const Vec&, const Vec& v) { return stack(Bd, 2 * K4 * v); };
  d.control_set = ControlSet::box(Vec::Constant(m, -lq.control_bound), Vec::Constant(m, lq.control_bound));
  d.target = Target::free(n);
  d.history_state = constant_history(lq.x0, lq.delta, Interp::linear);
  d.history_control = constant_history(Vec::Zero(m), lq.delta, Interp::piecewise_constant);
  d.final_time = lq.free_time ? FinalTime::free(lq.t_f) : FinalTime::fixed(lq.t_f);

  AffineStructure a;
  a.drift = [=](double, double, const Vec& x, const Vec& y) { return Vec(A * x + Ad * y); };
  a.f1 = [=](double, double, const Vec&, const Vec&) { return B; };
  a.f2 = [=](double, double, const Vec&, const Vec&) { return Bd; };
  a.cost_drift = [=](double, double, const Vec& x, const Vec& y) {
    return K1 * x.squaredNorm() + K2 * y.squaredNorm();
  };
  a.quad_u = K3;
  a.quad_v = K4;
  d.affine = a;
  return OcpProblem(std::move(d));
}

/// Minimum-time double integrator x1' = x2, x2' = u, |u| <= 1, from (x0, 0)
/// to the origin.
inline OcpProblem build_double_integrator(double x0 = 1.0, double delta = 1.0) {
  OcpDefinition d;
  d.name = "double-integrator";
  d.parameters = {{"x0", x0}, {"delta", delta}};
  d.state_dim = 2;
  d.control_dim = 1;
  d.dynamics = [](double, double, const Vec& x, const Vec&, const Vec& u, const Vec&) {
    Vec r(2);
    r << x[1], u[0];
    return r;
  };
  d.running_cost = [](double, double, const Vec&, const Vec&, const Vec&, const Vec&) { return 1.0; };
  d.control_set = ControlSet::box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
  d.target = Target::point(Vec::Zero(2));
  Vec h0(2);
  h0 << x0, 0.0;
  d.history_state = constant_history(h0, delta, Interp::linear);
  d.history_control = constant_history(Vec::Zero(1), delta, Interp::piecewise_constant);
  d.final_time = FinalTime::free(2.0 * std::sqrt(std::abs(x0)));
  AffineStructure a;
  a.drift = [](double, double, const Vec& x, const Vec&) {
    Vec r(2);
    r << x[1], 0.0;
    return r;
  };
  a.f1 = [](double, double, const Vec&, const Vec&) {
    Mat F(2, 1);
    F << 0.0, 1.0;
    return F;
  };
  a.f2 = [](double, double, const Vec&, const Vec&) { return Mat(Mat::Zero(2, 1)); };
  a.cost_drift = [](double, double, const Vec&, const Vec&) { return 1.0; };
  d.affine = a;
  return OcpProblem(std::move(d));
}

/// Pure control delay instance used to cross-check the stacked reduction:
/// x' = A x + B u + Bd u(t - tau2) on [0, 1], K = (1, 0, 1, 0.5).
inline LqData control_delay_lq() {
  LqData d = default_delayed_lq();
  d.Ad.setZero();
  d.A << 0.0, 1.0, -1.0, -0.5;
  d.K2 = 0.0;
  return d;
}

inline const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = {"counterexample", "delayed-lq", "control-delay-lq",
                                                 "double-integrator"};
  return names;
}

/// Built-in problem by name. Recognised parameters: oscillation_K, delta,
/// t_f, free_time (0/1), x0.
inline OcpProblem make_builtin(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  const double delta = get("delta", 1.0);
  if (name == "counterexample") return build_counterexample(get("oscillation_K", 10.0), delta);
  if (name == "delayed-lq" || name == "control-delay-lq") {
    LqData d = name == "delayed-lq" ? default_delayed_lq() : control_delay_lq();
    d.delta = delta;
    d.t_f = get("t_f", d.t_f);
    d.free_time = get("free_time", 0.0) != 0.0;
    return build_delayed_lq(d, name);
  }
  if (name == "double-integrator") return build_double_integrator(get("x0", 1.0), delta);
  throw ConfigError("unknown problem '" + name + "'");
}

}  // namespace dpmp

#endif  // DPMP_PROBLEMS_HPP
