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

// Reduction of a pure control delay to a larger system without delays.
//
// With tau = tau2 > 0 and N tau < t_f <= (N + 1) tau, block i of the stacked
// state on s in [0, tau] is z_i(s) = x(i tau + s) and block i of the stacked
// control is w_i(s) = u(i tau + s). Block i is driven by w_i and by the lagged
// control w_{i-1} (the control history for i = 0). The last block has length
// r = t_f - N tau and is frozen for s > r. Consecutive blocks are joined by
// the links z_0(0) = x0 and z_i(0) = z_{i-1}(tau).

#ifndef DPMP_GUINN_HPP
#define DPMP_GUINN_HPP

#include <cmath>
#include <memory>
#include <sstream>
#include <string>

#include "dpmp/errors.hpp"
#include "dpmp/integrator.hpp"
#include "dpmp/ocp.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

namespace detail {

struct GuinnLayout {
  std::shared_ptr<const OcpProblem> orig;
  double tau = 0.0;
  std::size_t N = 0;
  double last = 0.0;

  /// Whether block i evolves at s; side selects one-sided limits at s = r.
  bool active(std::size_t i, double s, int side = 0) const {
    if (i < N || last >= tau - time_slack(0.0, tau)) return true;
    if (std::abs(s - last) <= time_slack(0.0, tau)) return side <= 0;
    return s < last;
  }

  OcpProblem::Point point(std::size_t i, double s, const Vec& Z, const Vec& W) const {
    const Eigen::Index n = orig->n(), m = orig->m(), bi = static_cast<Eigen::Index>(i);
    const double t = static_cast<double>(i) * tau + s;
    Vec v = i == 0 ? orig->history_control().eval(s - tau) : Vec(W.segment(m * (bi - 1), m));
    Vec x = Z.segment(n * bi, n);
    return {t, t, x, x, W.segment(m * bi, m), v};
  }
};

}  // namespace detail

class GuinnReduction {
 public:
  GuinnReduction(std::shared_ptr<const OcpProblem> original, double tau2, std::size_t N)
      : orig_(std::move(original)), tau_(tau2), N_(N) {
    const OcpProblem& p = *orig_;
    if (p.final_time().is_free()) throw ConfigError("guinn_reduce: final time must be fixed");
    if (!(tau_ > 0)) throw ConfigError("guinn_reduce: the control delay must be positive");
    const double t_f = p.final_time().t_f;
    const double eps = time_slack(t_f, tau_);
    const double lo = static_cast<double>(N_) * tau_, hi = static_cast<double>(N_ + 1) * tau_;
    if (!(t_f > lo + eps && t_f <= hi + eps)) {
      std::ostringstream os;
      os << "guinn_reduce: need N*tau2 < t_f <= (N+1)*tau2, got N=" << N_ << ", tau2=" << tau_ << ", t_f=" << t_f;
      throw ConfigError(os.str());
    }
    last_ = std::min(t_f - lo, tau_);
    if (p.control_set().kind() == ControlSet::Kind::ball && p.m() > 1)
      throw ConfigError("guinn_reduce: a product of balls is not a supported control set");
    auto lay = std::make_shared<detail::GuinnLayout>();
    lay->orig = orig_;
    lay->tau = tau_;
    lay->N = N_;
    lay->last = last_;
    layout_ = lay;
    reduced_ = std::make_shared<OcpProblem>(build());
  }

  const OcpProblem& original() const noexcept { return *orig_; }
  const OcpProblem& reduced() const noexcept { return *reduced_; }
  double tau2() const noexcept { return tau_; }
  std::size_t blocks() const noexcept { return N_ + 1; }
  /// Length of the last block.
  double last_length() const noexcept { return last_; }

  /// Boundary links  link_start Z(0) + link_end Z(tau2) = link_rhs.
  Mat link_start() const {
    const Eigen::Index n = orig_->n(), D = n * static_cast<Eigen::Index>(blocks());
    return Mat::Identity(D, D);
  }
  Mat link_end() const {
    const Eigen::Index n = orig_->n(), D = n * static_cast<Eigen::Index>(blocks());
    Mat E = Mat::Zero(D, D);
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(blocks()); ++i)
      E.block(n * i, n * (i - 1), n, n) = -Mat::Identity(n, n);
    return E;
  }
  Vec link_rhs() const {
    Vec e = Vec::Zero(orig_->n() * static_cast<Eigen::Index>(blocks()));
    e.head(orig_->n()) = orig_->history_state().eval(0.0);
    return e;
  }

  /// Stacks a function of the original time on a grid over [0, tau2]; the
  /// last block is read at min(s, r).
  template <class F>
  SampledFunction stack(const F& f, std::size_t steps) const {
    const TimeGrid g(0.0, tau_, steps);
    const Eigen::Index d = f.eval(0.0).size();
    return SampledFunction::sample(
        g,
        [&](double s) {
          Vec z(d * static_cast<Eigen::Index>(blocks()));
          for (std::size_t i = 0; i < blocks(); ++i) z.segment(d * static_cast<Eigen::Index>(i), d) = f.eval(time_of(i, s));
          return z;
        },
        Interp::linear);
  }

  /// Inverse of stack on a grid over [0, t_f].
  SampledFunction unstack(const SampledFunction& z, const TimeGrid& out) const {
    const Eigen::Index d = z.dim() / static_cast<Eigen::Index>(blocks());
    if (d * static_cast<Eigen::Index>(blocks()) != z.dim()) throw DimensionMismatch("unstack: dimension");
    return SampledFunction::sample(
        out,
        [&](double t) {
          std::size_t i = std::min<std::size_t>(N_, static_cast<std::size_t>(std::max(0.0, std::floor(t / tau_))));
          double s = t - static_cast<double>(i) * tau_;
          if (i > 0 && s <= time_slack(t, tau_)) {
            --i;
            s = tau_;
          }
          return Vec(z.eval(std::clamp(s, 0.0, tau_)).segment(d * static_cast<Eigen::Index>(i), d));
        },
        Interp::linear);
  }

  /// Stacked state for an original control, integrated block after block
  /// (N + 1 passes), each block starting where the previous one ended.
  SampledFunction simulate(const Trajectory& u, std::size_t steps, Scheme scheme = Scheme::rk4) const {
    const OcpProblem& p = *orig_;
    const Eigen::Index n = p.n();
    const TimeGrid g(0.0, tau_, steps);
    Mat Z(n * static_cast<Eigen::Index>(blocks()), static_cast<Eigen::Index>(g.size()));
    Mat dZ(Z.rows(), Z.cols());
    Vec start = p.history_state().eval(0.0);
    for (std::size_t i = 0; i < blocks(); ++i) {
      const auto row = n * static_cast<Eigen::Index>(i);
      auto rhs = [&](double s, const Vec& z, int stage) -> Vec {
        if (!layout_->active(i, s, stage_side(scheme, stage, false))) return Vec::Zero(n);
        const double t = static_cast<double>(i) * tau_ + s;
        const int side = stage_side(scheme, stage, false);
        OcpProblem::Point a{t, t, z, z, u.eval(t), u.eval(t - tau_, side)};
        return p.f(a);
      };
      auto store = [&](std::size_t k, const Vec& z, const Vec& dz) {
        Z.block(row, static_cast<Eigen::Index>(k), n, 1) = z;
        dZ.block(row, static_cast<Eigen::Index>(k), n, 1) = dz;
      };
      march(g, false, start, scheme, rhs, store, std::nullopt, "guinn_simulate");
      start = Z.block(row, Z.cols() - 1, n, 1);
    }
    return SampledFunction(g, Z, dZ);
  }

 private:
  double time_of(std::size_t i, double s) const {
    return static_cast<double>(i) * tau_ + (i == N_ ? std::min(s, last_) : s);
  }

  OcpProblem build() const {
    const OcpProblem& p = *orig_;
    const Eigen::Index n = p.n(), m = p.m(), B = static_cast<Eigen::Index>(blocks());
    auto L = layout_;
    auto pt = [L](std::size_t i, double s, const Vec& Z, const Vec& W) { return L->point(i, s, Z, W); };

    OcpDefinition d;
    d.name = p.name() + "-guinn";
    d.parameters = p.parameters();
    d.parameters["guinn_blocks"] = static_cast<double>(B);
    d.state_dim = n * B;
    d.control_dim = m * B;
    d.dynamics = [L, pt, n, B](double s, double, const Vec& Z, const Vec&, const Vec& W, const Vec&) {
      Vec r = Vec::Zero(n * B);
      for (Eigen::Index i = 0; i < B; ++i)
        if (L->active(static_cast<std::size_t>(i), s)) r.segment(n * i, n) = L->orig->f(pt(static_cast<std::size_t>(i), s, Z, W));
      return r;
    };
    d.running_cost = [L, pt, B](double s, double, const Vec& Z, const Vec&, const Vec& W, const Vec&) {
      double c = 0.0;
      for (Eigen::Index i = 0; i < B; ++i)
        if (L->active(static_cast<std::size_t>(i), s)) c += L->orig->f0(pt(static_cast<std::size_t>(i), s, Z, W));
      return c;
    };
    // Jacobians of the extended field (f, f0), one row per state plus the cost row.
    d.jac_x = [L, pt, n, B](double s, double, const Vec& Z, const Vec&, const Vec& W, const Vec&) {
      Mat J = Mat::Zero(n * B + 1, n * B);
      for (Eigen::Index i = 0; i < B; ++i) {
        if (!L->active(static_cast<std::size_t>(i), s)) continue;
        const auto a = pt(static_cast<std::size_t>(i), s, Z, W);
        const Mat jx = L->orig->jac_x(a) + L->orig->jac_y(a);
        J.block(n * i, n * i, n, n) = jx.topRows(n);
        J.block(n * B, n * i, 1, n) = jx.bottomRows(1);
      }
      return J;
    };
    d.jac_y = [n, B](double, double, const Vec&, const Vec&, const Vec&, const Vec&) {
      return Mat(Mat::Zero(n * B + 1, n * B));
    };
    d.jac_u = [L, pt, n, m, B](double s, double, const Vec& Z, const Vec&, const Vec& W, const Vec&) {
      Mat J = Mat::Zero(n * B + 1, m * B);
      for (Eigen::Index i = 0; i < B; ++i) {
        if (!L->active(static_cast<std::size_t>(i), s)) continue;
        const auto a = pt(static_cast<std::size_t>(i), s, Z, W);
        const Mat ju = L->orig->jac_u(a), jv = L->orig->jac_v(a);
        J.block(n * i, m * i, n, m) += ju.topRows(n);
        J.block(n * B, m * i, 1, m) += ju.bottomRows(1);
        if (i > 0) {
          J.block(n * i, m * (i - 1), n, m) += jv.topRows(n);
          J.block(n * B, m * (i - 1), 1, m) += jv.bottomRows(1);
        }
      }
      return J;
    };
    d.jac_v = [n, m, B](double, double, const Vec&, const Vec&, const Vec&, const Vec&) {
      return Mat(Mat::Zero(n * B + 1, m * B));
    };

    const ControlSet& U = p.control_set();
    if (U.kind() == ControlSet::Kind::box) {
      d.control_set = ControlSet::box(U.lower().replicate(B, 1), U.upper().replicate(B, 1));
    } else if (U.kind() == ControlSet::Kind::ball) {
      d.control_set = ControlSet::box(Vec::Constant(B, -U.radius()), Vec::Constant(B, U.radius()));
    } else {
      throw ConfigError("guinn_reduce: discrete control sets are not supported");
    }
    const Target& tg = p.target();
    Mat A = Mat::Zero(tg.n_constraints(), n * B);
    A.rightCols(n) = tg.A();
    d.target = Target::affine(A, tg.b());
    // Only the first block has a genuine initial state; the others are fixed
    // by the links and start from x0 here as a placeholder.
    d.history_state = SampledFunction::constant(TimeGrid(-tau_, 0.0, 1), p.history_state().eval(0.0).replicate(B, 1),
                                                Interp::linear);
    d.history_control = SampledFunction::constant(TimeGrid(-tau_, 0.0, 1), (*d.control_set).project(Vec::Zero(m * B)),
                                                  Interp::linear);
    d.final_time = FinalTime::fixed(tau_);
    return OcpProblem(std::move(d));
  }

  std::shared_ptr<const OcpProblem> orig_;
  double tau_;
  std::size_t N_;
  double last_ = 0.0;
  std::shared_ptr<const detail::GuinnLayout> layout_;
  std::shared_ptr<const OcpProblem> reduced_;
};

/// Guinn reduction of a pure control delay (tau0 = tau1 = 0, tau2 > 0).
inline GuinnReduction guinn_reduce(const OcpProblem& prob, const DelayVector& tau, std::size_t N) {
  if (tau.tau0 != 0.0 || tau.tau1 != 0.0) throw ConfigError("guinn_reduce: only pure control delays are reduced");
  return GuinnReduction(std::make_shared<const OcpProblem>(prob), tau.tau2, N);
}

}  // namespace dpmp

#endif  // DPMP_GUINN_HPP
