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

// Needle-like variations of an extremal: the vectors omega^-, omega^+, the
// linearized delayed flow carrying them to t_f, endpoint remainder ladders,
// finite samples of the Pontryagin cone and the multiplier pairing.

#ifndef DPMP_VARIATIONS_HPP
#define DPMP_VARIATIONS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/integrator.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/pmp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

namespace detail {

/// RK4 over an arbitrary increasing node list. Reads of completed cells use
/// cubic Hermite interpolation with one-sided end derivatives per cell.
class NodeMarch {
 public:
  explicit NodeMarch(std::vector<double> nodes, Eigen::Index dim)
      : t_(std::move(nodes)),
        z_(Mat::Zero(dim, static_cast<Eigen::Index>(t_.size()))),
        d0_(Mat::Zero(dim, static_cast<Eigen::Index>(t_.size()))),
        d1_(Mat::Zero(dim, static_cast<Eigen::Index>(t_.size()))) {}

  const std::vector<double>& nodes() const noexcept { return t_; }
  double t_start() const { return t_.front(); }
  Vec last() const { return z_.col(static_cast<Eigen::Index>(done_ - 1)); }

  Vec eval(double s) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(s));
    if (done_ == 0 || s < t_.front() - slack || s > t_[done_ - 1] + slack)
      throw OutOfDomain("NodeMarch: read outside the completed range");
    auto it = std::upper_bound(t_.begin(), t_.begin() + static_cast<std::ptrdiff_t>(done_), s);
    std::size_t k = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
    if (k + 1 >= done_) return z_.col(static_cast<Eigen::Index>(done_ - 1));
    const auto c = static_cast<Eigen::Index>(k);
    const double h = t_[k + 1] - t_[k];
    const double r = std::clamp((s - t_[k]) / h, 0.0, 1.0);
    const double r2 = r * r, r3 = r2 * r;
    return (2 * r3 - 3 * r2 + 1) * z_.col(c) + (r3 - 2 * r2 + r) * h * d0_.col(c) +
           (-2 * r3 + 3 * r2) * z_.col(c + 1) + (r3 - r2) * h * d1_.col(c);
  }

  /// `rhs(t, z, mid)` receives the midpoint of the current cell so that
  /// piecewise data can be classified per cell.
  template <class Rhs>
  void run(Vec z, const Rhs& rhs) {
    z_.col(0) = z;
    done_ = 1;
    for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
      const double a = t_[k], b = t_[k + 1], h = b - a, mid = 0.5 * (a + b);
      Vec k1 = rhs(a, z, mid);
      Vec k2 = rhs(mid, z + 0.5 * h * k1, mid);
      Vec k3 = rhs(mid, z + 0.5 * h * k2, mid);
      Vec k4 = rhs(b, z + h * k3, mid);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite()) throw NonFiniteState("NodeMarch: state is not finite");
      const auto c = static_cast<Eigen::Index>(k);
      d0_.col(c) = k1;
      z_.col(c + 1) = z;
      done_ = k + 2;
      d1_.col(c) = rhs(b, z, mid);
    }
  }

 private:
  std::vector<double> t_;
  Mat z_, d0_, d1_;
  std::size_t done_ = 0;
};

/// Uniform nodes of step at most hmax on [a, b] merged with the special
/// points that fall inside.
inline std::vector<double> merged_nodes(double a, double b, double hmax, std::vector<double> special) {
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / hmax - 1e-9));
  std::vector<double> t;
  const std::size_t steps = std::max<std::size_t>(n, 1);
  for (std::size_t k = 0; k <= steps; ++k) t.push_back(a + (b - a) * double(k) / double(steps));
  for (double s : special)
    if (s > a && s < b) t.push_back(s);
  std::sort(t.begin(), t.end());
  std::vector<double> out;
  for (double s : t)
    if (out.empty() || s - out.back() > 1e-11 * std::max(1.0, std::abs(s))) out.push_back(s);
  out.back() = b;
  return out;
}

/// Side for a stage at time t of the cell with midpoint mid.
inline int cell_side(double t, double mid) { return t < mid ? 1 : (t > mid ? -1 : 0); }

}  // namespace detail

/// omega^-: u(s) replaced by z in the current slot at time s. omega^+: the
/// lagged slot u(s) replaced by z at time s + tau2, zero when s + tau2 > t_f.
/// With tau2 = 0 both slots carry u(s) and omega^- is the single variation
/// with both replaced; omega^+ is then zero.
inline std::pair<Vec, Vec> omega_vectors(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext,
                                         double s, const Vec& z) {
  if (!(s > 0 && s < ext.t_f)) throw OutOfDomain("omega_vectors: s must lie in (0, t_f)");
  if (z.size() != prob.m()) throw DimensionMismatch("omega_vectors: control dimension");
  OcpProblem::Point a = point_at(ext.x, ext.u, tau, s);
  OcpProblem::Point b = a;
  b.u = z;
  if (tau.tau2 == 0.0) {
    b.v = z;
    return {Vec(prob.f_ext(b) - prob.f_ext(a)), Vec::Zero(prob.n() + 1)};
  }
  Vec minus = prob.f_ext(b) - prob.f_ext(a);
  Vec plus = Vec::Zero(prob.n() + 1);
  const double sp = s + tau.tau2;
  if (sp <= ext.t_f) {
    OcpProblem::Point c = point_at(ext.x, ext.u, tau, sp);
    c.v = ext.u.eval(s);
    OcpProblem::Point d = c;
    d.v = z;
    plus = prob.f_ext(d) - prob.f_ext(c);
  }
  return {minus, plus};
}

/// psi(t_query) for psi' = F_x psi + F_y psi(t - tau1), psi(s) = xi, psi = 0
/// before s, along the extremal; F is the extended field, blind to x^0.
inline Vec variation_vector(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext, double s,
                            const Vec& xi, double t_query, double hmax = 0.0) {
  const Eigen::Index n = prob.n();
  if (xi.size() != n + 1) throw DimensionMismatch("variation_vector: xi must have dimension n + 1");
  if (!(s >= 0 && s < t_query && t_query <= ext.t_f * (1 + 1e-12)))
    throw OutOfDomain("variation_vector: need 0 <= s < t_query <= t_f");
  if (hmax <= 0) hmax = ext.u.body().grid().step();
  if (tau.tau1 > 0) hmax = std::min(hmax, tau.tau1);
  std::vector<double> special;
  if (tau.tau1 > 0)
    for (double c = s + tau.tau1; c < t_query; c += tau.tau1) special.push_back(c);
  if (tau.tau2 > 0) special.push_back(tau.tau2);
  detail::NodeMarch m(detail::merged_nodes(s, t_query, hmax, special), n + 1);
  auto rhs = [&](double t, const Vec& psi, double mid) -> Vec {
    const int side = detail::cell_side(t, mid);
    const double tc = std::min(t, ext.t_f);
    const OcpProblem::Point a = point_at(ext.x, ext.u, tau, tc, side);
    Vec r = prob.jac_x(a) * psi.head(n);
    if (tau.tau1 == 0.0) {
      r += prob.jac_y(a) * psi.head(n);
    } else if (mid - tau.tau1 > s) {
      r += prob.jac_y(a) * m.eval(t - tau.tau1).head(n);
    }
    return r;
  };
  m.run(xi, rhs);
  return m.last();
}

/// Needles u -> values[i] on (times[i] - eta * widths[i], times[i]] and a
/// final time shift delta * eta, for every eta of a ladder.
struct NeedleSpec {
  std::vector<double> times;
  std::vector<double> widths;
  std::vector<Vec> values;
  double delta = 0.0;
};

struct NeedleReport {
  std::vector<double> eta;
  std::vector<double> remainder;
  /// Least-squares slope of log remainder against log eta.
  double slope = 0.0;
  /// First-order endpoint coefficient: delta f(t_f) + sum of widths times w.
  Vec first_order;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(std::max(y[i], std::numeric_limits<double>::min()));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = double(n) * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (double(n) * sxy - sx * sy) / den;
}

/// Breakpoints k tau1 + l tau2 (k + l >= 1) inside (0, t_f).
inline std::vector<double> delay_breakpoints(const DelayVector& tau, double t_f) {
  std::vector<double> b;
  const double a1 = tau.tau1, a2 = tau.tau2;
  for (int k = 0; k * a1 < t_f && k < 10000; ++k) {
    for (int l = 0; k * a1 + l * a2 < t_f && l < 10000; ++l) {
      if (k + l > 0 && k * a1 + l * a2 > 0) b.push_back(k * a1 + l * a2);
      if (a2 == 0.0) break;
    }
    if (a1 == 0.0) break;
  }
  return b;
}

namespace detail {

inline void check_needles(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext, const NeedleSpec& sp,
                          double eta_max) {
  if (sp.widths.size() != sp.times.size() || sp.values.size() != sp.times.size())
    throw ConfigError("NeedleSpec: times, widths and values must have equal length");
  const double h = ext.u.body().grid().step();
  for (std::size_t i = 0; i < sp.times.size(); ++i) {
    const double t = sp.times[i], w = sp.widths[i] * eta_max;
    if (!(t > 0 && t < ext.t_f)) throw ConfigError("NeedleSpec: needle times must lie in (0, t_f)");
    if (!(sp.widths[i] > 0)) throw ConfigError("NeedleSpec: widths must be positive");
    if (t - w < -tau.delta) throw ConfigError("NeedleSpec: needle reaches before -delta");
    if (i > 0 && !(t - w > sp.times[i - 1])) throw ConfigError("NeedleSpec: needles must be increasing and disjoint");
    if (!prob.control_set().contains(sp.values[i], 1e-12)) throw ConfigError("NeedleSpec: value outside U");
    for (double b : delay_breakpoints(tau, ext.t_f))
      if (std::abs(t - b) <= 2 * h) throw ConfigError("NeedleSpec: needle time too close to a delay breakpoint");
  }
}

/// Extended state at T under u with the needles of width eta applied.
inline Vec needle_endpoint(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext, const NeedleSpec& sp,
                           double eta, double T, const std::vector<double>& nodes) {
  const Eigen::Index n = prob.n();
  auto control = [&](double s, double smid) -> Vec {
    for (std::size_t i = 0; i < sp.times.size(); ++i)
      if (smid > sp.times[i] - eta * sp.widths[i] && smid <= sp.times[i]) return sp.values[i];
    if (s > ext.t_f) return ext.u.eval(ext.t_f);
    return ext.u.eval(s, smid < 0 ? -1 : 1);
  };
  NodeMarch m(nodes, n + 1);
  auto rhs = [&](double t, const Vec& z, double mid) -> Vec {
    OcpProblem::Point a;
    a.t = t;
    a.s = t - tau.tau0;
    a.x = z.head(n);
    if (tau.tau1 == 0.0)
      a.y = a.x;
    else if (t - tau.tau1 <= 0.0)
      a.y = prob.history_state().eval(std::max(t - tau.tau1, prob.history_state().t_start()));
    else
      a.y = m.eval(t - tau.tau1).head(n);
    a.u = control(t, mid);
    a.v = tau.tau2 == 0.0 ? a.u : control(t - tau.tau2, mid - tau.tau2);
    return prob.f_ext(a);
  };
  Vec z0 = Vec::Zero(n + 1);
  z0.head(n) = prob.history_state().eval(0.0);
  m.run(z0, rhs);
  return m.last();
}

}  // namespace detail

/// Remainder of the first-order endpoint formula over an eta ladder:
///   r(eta) = |x~^pi(t_f + delta eta) - x~(t_f) - delta eta f~(t_f) - eta w|,
/// with w = sum_i widths[i] (v_{t_i, omega^-} + v_{t_i + tau2, omega^+})(t_f).
/// Perturbed and reference runs share one node set per eta.
inline NeedleReport needle_endpoint_check(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext,
                                          const NeedleSpec& spec, std::vector<double> eta_ladder) {
  if (eta_ladder.size() < 2) throw ConfigError("needle_endpoint_check: ladder needs at least two values");
  std::sort(eta_ladder.begin(), eta_ladder.end());
  if (!(eta_ladder.front() > 0)) throw ConfigError("needle_endpoint_check: eta must be positive");
  const double eta_max = eta_ladder.back();
  detail::check_needles(prob, tau, ext, spec, eta_max);
  const Eigen::Index n = prob.n();
  const double h = std::min(ext.u.body().grid().step(), tau.tau1 > 0 ? tau.tau1 : 1.0);

  Vec w = Vec::Zero(n + 1);
  for (std::size_t i = 0; i < spec.times.size(); ++i) {
    const auto [om, op] = omega_vectors(prob, tau, ext, spec.times[i], spec.values[i]);
    w += spec.widths[i] * variation_vector(prob, tau, ext, spec.times[i], om, ext.t_f, h);
    if (tau.tau2 > 0 && spec.times[i] + tau.tau2 < ext.t_f)
      w += spec.widths[i] * variation_vector(prob, tau, ext, spec.times[i] + tau.tau2, op, ext.t_f, h);
  }
  const Vec f_end = prob.f_ext(point_at(ext.x, ext.u, tau, ext.t_f, -1));

  NeedleReport rep;
  rep.first_order = spec.delta * f_end + w;
  for (double eta : eta_ladder) {
    const double T = ext.t_f + spec.delta * eta;
    std::vector<double> special = {ext.t_f, T};
    for (double c : {0.0, tau.tau2}) special.push_back(c);
    if (tau.tau2 > 0) special.push_back(ext.t_f - tau.tau2);
    for (std::size_t i = 0; i < spec.times.size(); ++i)
      for (double c : {spec.times[i], spec.times[i] - eta * spec.widths[i]}) {
        special.push_back(c);
        special.push_back(c + tau.tau2);
      }
    const double T_ref = ext.t_f;
    const std::vector<double> nodes = detail::merged_nodes(0.0, std::max(T, T_ref), h, special);
    auto upto = [&](double end) {
      std::vector<double> v;
      for (double s : nodes)
        if (s < end - 1e-11) v.push_back(s);
      v.push_back(end);
      return v;
    };
    const NeedleSpec none{};
    const Vec ref = detail::needle_endpoint(prob, tau, ext, none, eta, T_ref, upto(T_ref));
    const Vec pert = detail::needle_endpoint(prob, tau, ext, spec, eta, T, upto(T));
    rep.eta.push_back(eta);
    rep.remainder.push_back((pert - ref - eta * rep.first_order).norm());
  }
  rep.slope = loglog_slope(rep.eta, rep.remainder);
  return rep;
}

/// Pure shift of the final time to t_f - eta, where the stored control is
/// read from the left only.
inline NeedleReport time_shift_check(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext,
                                     const std::vector<double>& ladder) {
  NeedleSpec sp;
  sp.delta = -1.0;
  return needle_endpoint_check(prob, tau, ext, sp, ladder);
}

/// Control-mesh time in [lo t_f, hi t_f], clear of delay breakpoints, where
/// u varies least over the trailing window of length `window`.
inline double quiet_needle_time(const DelayVector& tau, const Extremal& ext, double window, double lo = 0.3,
                                double hi = 0.7) {
  const TimeGrid& g = ext.u.body().grid();
  const double h = g.step();
  const auto breaks = delay_breakpoints(tau, ext.t_f);
  double best_t = 0.5 * ext.t_f, best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double t = g.node(k);
    if (t < lo * ext.t_f || t > hi * ext.t_f || t - window <= 0) continue;
    bool near = false;
    for (double b : breaks) near = near || std::abs(t - b) <= 2 * h || (b > t - window - 2 * h && b < t);
    if (near) continue;
    const Vec u = ext.u.eval(t);
    double var = 0.0;
    for (double d = 0.0; d <= window; d += 0.5 * h) var = std::max(var, (ext.u.eval(t - d) - u).norm());
    if (var < best) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

/// Lattice point of U whose needle at t moves the extended endpoint most to
/// first order, measured by |omega^-| + |omega^+|.
inline Vec needle_value_for(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext, double t,
                            int lattice = 3) {
  Vec best;
  double gain = -1.0;
  for (const Vec& w : prob.control_set().lattice(lattice)) {
    const auto [om, op] = omega_vectors(prob, tau, ext, t, w);
    if (om.norm() + op.norm() > gain) {
      gain = om.norm() + op.norm();
      best = w;
    }
  }
  return best;
}

struct ConeSample {
  std::vector<Vec> vectors;
  /// (s, z) per vector; the two +-f~(t_f) vectors of an augmented sample
  /// carry s = t_f and an empty z.
  std::vector<std::pair<double, Vec>> provenance;
};

/// w~(t_f) = v_{s, omega^-}(t_f) + v_{s + tau2, omega^+}(t_f) per pair;
/// the augmented sample appends f~(t_f) and -f~(t_f).
inline ConeSample cone_sample(const OcpProblem& prob, const DelayVector& tau, const Extremal& ext,
                              const std::vector<std::pair<double, Vec>>& pairs, bool augmented) {
  ConeSample c;
  for (const auto& [s, z] : pairs) {
    const auto [om, op] = omega_vectors(prob, tau, ext, s, z);
    Vec w = variation_vector(prob, tau, ext, s, om, ext.t_f);
    if (tau.tau2 > 0 && s + tau.tau2 < ext.t_f) w += variation_vector(prob, tau, ext, s + tau.tau2, op, ext.t_f);
    if (!w.allFinite()) throw NonFiniteState("cone_sample: variation vector is not finite");
    c.vectors.push_back(std::move(w));
    c.provenance.emplace_back(s, z);
  }
  if (augmented) {
    const Vec f_end = prob.f_ext(point_at(ext.x, ext.u, tau, ext.t_f, -1));
    c.vectors.push_back(f_end);
    c.vectors.push_back(-f_end);
    c.provenance.emplace_back(ext.t_f, Vec());
    c.provenance.emplace_back(ext.t_f, Vec());
  }
  return c;
}

/// Regular (s, z) lattice: `times` interior times avoiding delay breakpoints
/// by more than two cells, times the control lattice of U.
inline std::vector<std::pair<double, Vec>> cone_pairs(const OcpProblem& prob, const DelayVector& tau,
                                                      const Extremal& ext, int times, int lattice) {
  const double h = ext.u.body().grid().step();
  const auto breaks = delay_breakpoints(tau, ext.t_f);
  std::vector<std::pair<double, Vec>> out;
  const auto zs = prob.control_set().lattice(lattice);
  for (int i = 1; i <= times; ++i) {
    double s = ext.t_f * double(i) / double(times + 1);
    for (double b : breaks)
      if (std::abs(s - b) <= 2 * h) s = b + 3 * h;
    if (!(s < ext.t_f)) continue;
    for (const Vec& z : zs) out.emplace_back(s, z);
  }
  return out;
}

/// max over the cone vectors of <(p(t_f), p0), w>; -inf for an empty cone.
inline double multiplier_check(const Extremal& ext, const ConeSample& cone) {
  const Vec psi = OcpProblem::ext(ext.p.eval(ext.t_f), ext.p0);
  double best = -std::numeric_limits<double>::infinity();
  for (const Vec& w : cone.vectors) best = std::max(best, psi.dot(w));
  return best;
}

/// <(p(t_f), p0), f~(t_f)>, zero for free-time extremals.
inline double endpoint_pairing(const OcpProblem& prob, const Extremal& ext) {
  const Vec f_end = prob.f_ext(point_at(ext.x, ext.u, ext.tau, ext.t_f, -1));
  return OcpProblem::ext(ext.p.eval(ext.t_f), ext.p0).dot(f_end);
}

}  // namespace dpmp

#endif  // DPMP_VARIATIONS_HPP
