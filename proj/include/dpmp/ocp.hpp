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

// Optimal control problems with constant delays:
//
//   x'(t) = f(t, t - tau0, x(t), x(t - tau1), u(t), u(t - tau2)),  t in [0, t_f]
//   x = phi1, u = phi2 on [-Delta, 0],   u(t) in U,   x(t_f) in M_f
//   minimize  int_0^t_f f0(t, t - tau0, x(t), x(t - tau1), u(t), u(t - tau2)) dt
//
// Jacobians are of the extended field (f, f0), so each has n + 1 rows with
// the cost row last.

#ifndef DPMP_OCP_HPP
#define DPMP_OCP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpmp/errors.hpp"
#include "dpmp/time_mesh.hpp"

namespace dpmp {

using DynamicsFn = std::function<Vec(double t, double s, const Vec& x, const Vec& y,
                                     const Vec& u, const Vec& v)>;
using CostFn = std::function<double(double t, double s, const Vec& x, const Vec& y,
                                    const Vec& u, const Vec& v)>;
using JacobianFn = std::function<Mat(double t, double s, const Vec& x, const Vec& y,
                                     const Vec& u, const Vec& v)>;

/// Compact convex control set (ball or box), or a finite vertex list used only
/// to describe bang-bang structure.
class ControlSet {
 public:
  enum class Kind { ball, box, discrete_extremes };

  static ControlSet ball(Eigen::Index dim, double radius) {
    if (dim <= 0 || !(radius > 0)) throw ConfigError("ControlSet::ball: bad dimension or radius");
    ControlSet c;
    c.kind_ = Kind::ball;
    c.dim_ = dim;
    c.radius_ = radius;
    return c;
  }

  static ControlSet box(Vec lower, Vec upper) {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw DimensionMismatch("ControlSet::box: bound sizes differ");
    if (((upper - lower).array() < 0).any()) throw ConfigError("ControlSet::box: lower > upper");
    ControlSet c;
    c.kind_ = Kind::box;
    c.dim_ = lower.size();
    c.lower_ = std::move(lower);
    c.upper_ = std::move(upper);
    return c;
  }

  static ControlSet discrete_extremes(std::vector<Vec> vertices) {
    if (vertices.empty()) throw ConfigError("ControlSet::discrete_extremes: no vertices");
    ControlSet c;
    c.kind_ = Kind::discrete_extremes;
    c.dim_ = vertices.front().size();
    for (const auto& v : vertices)
      if (v.size() != c.dim_) throw DimensionMismatch("ControlSet: vertex dimensions differ");
    c.vertices_ = std::move(vertices);
    return c;
  }

  Kind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return dim_; }
  double radius() const noexcept { return radius_; }
  const Vec& lower() const noexcept { return lower_; }
  const Vec& upper() const noexcept { return upper_; }
  const std::vector<Vec>& vertices() const noexcept { return vertices_; }

  bool contains(const Vec& u, double tol = 1e-9) const {
    if (u.size() != dim_) return false;
    switch (kind_) {
      case Kind::ball:
        return u.norm() <= radius_ * (1.0 + tol) + tol;
      case Kind::box:
        return ((u - lower_).array() >= -tol).all() && ((upper_ - u).array() >= -tol).all();
      case Kind::discrete_extremes:
        for (const auto& v : vertices_)
          if ((v - u).lpNorm<Eigen::Infinity>() <= tol) return true;
        return false;
    }
    return false;
  }

  /// Euclidean projection (nearest vertex for the discrete kind).
  Vec project(const Vec& u) const {
    switch (kind_) {
      case Kind::ball: {
        const double r = u.norm();
        return r <= radius_ ? u : Vec(u * (radius_ / r));
      }
      case Kind::box:
        return u.cwiseMax(lower_).cwiseMin(upper_);
      case Kind::discrete_extremes: {
        const Vec* best = &vertices_.front();
        for (const auto& v : vertices_)
          if ((v - u).squaredNorm() < (*best - u).squaredNorm()) best = &v;
        return *best;
      }
    }
    return u;
  }

  /// Finite set of points of U: a tensor lattice with `per_dim` points per
  /// axis (clipped to the ball, outside points pushed radially to the
  /// boundary sphere), or the vertex list.
  std::vector<Vec> lattice(int per_dim) const {
    if (kind_ == Kind::discrete_extremes) return vertices_;
    if (per_dim < 2) throw ConfigError("ControlSet::lattice: need at least 2 points per axis");
    Vec lo = kind_ == Kind::box ? lower_ : Vec::Constant(dim_, -radius_);
    Vec hi = kind_ == Kind::box ? upper_ : Vec::Constant(dim_, radius_);
    std::vector<Vec> pts;
    std::vector<int> idx(static_cast<std::size_t>(dim_), 0);
    while (true) {
      Vec p(dim_);
      for (Eigen::Index i = 0; i < dim_; ++i)
        p[i] = lo[i] + (hi[i] - lo[i]) * idx[static_cast<std::size_t>(i)] / (per_dim - 1.0);
      pts.push_back(project(p));
      Eigen::Index i = 0;
      while (i < dim_ && ++idx[static_cast<std::size_t>(i)] == per_dim) idx[static_cast<std::size_t>(i++)] = 0;
      if (i == dim_) break;
    }
    // Drop duplicates created by the radial projection.
    std::vector<Vec> unique;
    for (const auto& p : pts) {
      bool seen = false;
      for (const auto& q : unique)
        if ((p - q).lpNorm<Eigen::Infinity>() < 1e-12) seen = true;
      if (!seen) unique.push_back(p);
    }
    return unique;
  }

  /// Uniform-ish random point of U (rejection sampling for the ball).
  template <class Rng>
  Vec sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    switch (kind_) {
      case Kind::ball:
        for (;;) {
          Vec p(dim_);
          for (Eigen::Index i = 0; i < dim_; ++i) p[i] = unit(rng);
          if (p.norm() <= 1.0) return radius_ * p;
        }
      case Kind::box: {
        Vec p(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i)
          p[i] = lower_[i] + 0.5 * (unit(rng) + 1.0) * (upper_[i] - lower_[i]);
        return p;
      }
      case Kind::discrete_extremes: {
        std::uniform_int_distribution<std::size_t> pick(0, vertices_.size() - 1);
        return vertices_[pick(rng)];
      }
    }
    return Vec::Zero(dim_);
  }

 private:
  Kind kind_ = Kind::box;
  Eigen::Index dim_ = 0;
  double radius_ = 0.0;
  Vec lower_, upper_;
  std::vector<Vec> vertices_;
};

/// Terminal constraint: a point, or an affine submanifold {x : A x = b}.
/// A with zero rows is the free endpoint.
class Target {
 public:
  static Target point(Vec x) {
    Target t;
    t.is_point_ = true;
    t.A_ = Mat::Identity(x.size(), x.size());
    t.b_ = std::move(x);
    t.basis_ = Mat::Zero(t.b_.size(), 0);
    return t;
  }

  static Target affine(Mat A, Vec b) {
    if (A.rows() != b.size()) throw DimensionMismatch("Target::affine: A and b row counts differ");
    Target t;
    t.is_point_ = false;
    const Eigen::Index n = A.cols();
    if (A.rows() == 0) {
      t.basis_ = Mat::Identity(n, n);
    } else {
      Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
      const Eigen::Index rank = svd.rank();
      if (rank != A.rows()) throw ConfigError("Target::affine: constraint rows must be independent");
      t.basis_ = svd.matrixV().rightCols(n - rank);
    }
    t.A_ = std::move(A);
    t.b_ = std::move(b);
    return t;
  }

  static Target free(Eigen::Index n) { return affine(Mat::Zero(0, n), Vec::Zero(0)); }

  bool is_point() const noexcept { return is_point_; }
  Eigen::Index dim() const noexcept { return A_.cols(); }
  Eigen::Index n_constraints() const noexcept { return A_.rows(); }
  const Mat& A() const noexcept { return A_; }
  const Vec& b() const noexcept { return b_; }

  /// Orthonormal basis of the tangent space (n x (n - constraints)).
  const Mat& tangent_basis() const noexcept { return basis_; }

  /// A x - b (x - x_target for a point).
  Vec defect(const Vec& x) const { return A_ * x - b_; }

  /// Orthogonal projection of p on the tangent space; zero when p is
  /// transversal.
  Vec transversality(const Vec& p) const { return basis_ * (basis_.transpose() * p); }

 private:
  bool is_point_ = false;
  Mat A_;
  Vec b_;
  Mat basis_;
};

struct FinalTime {
  enum class Mode { fixed, free };
  Mode mode = Mode::fixed;
  /// Horizon when fixed; nominal guess when free.
  double t_f = 1.0;

  static FinalTime fixed(double t) { return {Mode::fixed, t}; }
  static FinalTime free(double guess) { return {Mode::free, guess}; }
  bool is_free() const noexcept { return mode == Mode::free; }
};

/// Control-affine form of the dynamics and cost:
///   f  = drift(t,s,x,y) + f1(t,s,x,y) u + f2(t,s,x,y) v
///   f0 = cost_drift + cost_u . u + cost_v . v + quad_u |u|^2 + quad_v |v|^2
/// The isotropic quadratic terms cover coercive costs such as the delayed LQ
/// family; they are zero for genuinely affine problems.
struct AffineStructure {
  std::function<Vec(double, double, const Vec&, const Vec&)> drift;
  std::function<Mat(double, double, const Vec&, const Vec&)> f1;
  std::function<Mat(double, double, const Vec&, const Vec&)> f2;
  std::function<double(double, double, const Vec&, const Vec&)> cost_drift;
  std::function<Vec(double, double, const Vec&, const Vec&)> cost_u;
  std::function<Vec(double, double, const Vec&, const Vec&)> cost_v;
  double quad_u = 0.0;
  double quad_v = 0.0;

  bool is_quadratic() const noexcept { return quad_u != 0.0 || quad_v != 0.0; }
};

/// Everything needed to build an OcpProblem. Jacobians left empty are
/// replaced by central finite differences.
struct OcpDefinition {
  std::string name = "custom";
  std::map<std::string, double> parameters;
  Eigen::Index state_dim = 0;
  Eigen::Index control_dim = 0;
  DynamicsFn dynamics;
  CostFn running_cost;
  JacobianFn jac_x, jac_y, jac_u, jac_v;
  std::optional<ControlSet> control_set;
  std::optional<Target> target;
  std::optional<SampledFunction> history_state;
  std::optional<SampledFunction> history_control;
  FinalTime final_time;
  std::optional<AffineStructure> affine;
  /// Scale of the random states used by the construction checks.
  double check_state_scale = 1.0;
};

namespace detail {

inline Mat fd_columns(const std::function<Vec(const Vec&)>& g, const Vec& z) {
  Vec g0 = g(z);
  Mat J(g0.size(), z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(z[j]));
    Vec zp = z, zm = z;
    zp[j] += step;
    zm[j] -= step;
    J.col(j) = (g(zp) - g(zm)) / (2.0 * step);
  }
  return J;
}

}  // namespace detail

/// Immutable optimal control problem. The constructor validates dimensions,
/// checks supplied Jacobians against central differences at random points,
/// checks the affine representation when present, and checks that the control
/// history stays inside U.
class OcpProblem {
 public:
  /// Arguments of f and f0 at one time instant.
  struct Point {
    double t = 0.0;
    double s = 0.0;
    Vec x, y, u, v;
  };

  explicit OcpProblem(OcpDefinition def) : def_(std::move(def)) {
    auto& d = def_;
    if (d.state_dim <= 0 || d.control_dim <= 0)
      throw ConfigError("OcpProblem: state and control dimensions must be positive");
    if (!d.dynamics || !d.running_cost) throw ConfigError("OcpProblem: dynamics and cost are required");
    if (!d.control_set) throw ConfigError("OcpProblem: control set is required");
    if (!d.target) throw ConfigError("OcpProblem: target is required");
    if (!d.history_state || !d.history_control) throw ConfigError("OcpProblem: histories are required");
    if (d.control_set->dim() != d.control_dim) throw DimensionMismatch("OcpProblem: control set dimension");
    if (d.target->dim() != d.state_dim) throw DimensionMismatch("OcpProblem: target dimension");
    if (d.history_state->dim() != d.state_dim || d.history_control->dim() != d.control_dim)
      throw DimensionMismatch("OcpProblem: history dimension");
    if (std::abs(d.history_state->t_end()) > 1e-12 || std::abs(d.history_control->t_end()) > 1e-12)
      throw ConfigError("OcpProblem: histories must end at t = 0");
    if (!(d.final_time.t_f > 0)) throw ConfigError("OcpProblem: final time must be positive");

    for (std::size_t k = 0; k < d.history_control->grid().size(); ++k)
      if (!d.control_set->contains(d.history_control->node_value(k)))
        throw ConfigError("OcpProblem: control history leaves the control set");

    const bool supplied[4] = {bool(d.jac_x), bool(d.jac_y), bool(d.jac_u), bool(d.jac_v)};
    if (!d.jac_x) d.jac_x = fd_jacobian(0);
    if (!d.jac_y) d.jac_y = fd_jacobian(1);
    if (!d.jac_u) d.jac_u = fd_jacobian(2);
    if (!d.jac_v) d.jac_v = fd_jacobian(3);
    check_consistency(supplied);
  }

  const std::string& name() const noexcept { return def_.name; }
  const std::map<std::string, double>& parameters() const noexcept { return def_.parameters; }
  Eigen::Index n() const noexcept { return def_.state_dim; }
  Eigen::Index m() const noexcept { return def_.control_dim; }
  const ControlSet& control_set() const noexcept { return *def_.control_set; }
  const Target& target() const noexcept { return *def_.target; }
  const SampledFunction& history_state() const noexcept { return *def_.history_state; }
  const SampledFunction& history_control() const noexcept { return *def_.history_control; }
  const FinalTime& final_time() const noexcept { return def_.final_time; }
  const std::optional<AffineStructure>& affine() const noexcept { return def_.affine; }
  const OcpDefinition& definition() const noexcept { return def_; }
  double history_span() const noexcept {
    return std::min(-def_.history_state->t_start(), -def_.history_control->t_start());
  }

  Vec f(const Point& a) const {
    Vec r = def_.dynamics(a.t, a.s, a.x, a.y, a.u, a.v);
    if (r.size() != n()) throw DimensionMismatch("OcpProblem: dynamics returned wrong size");
    return r;
  }
  double f0(const Point& a) const { return def_.running_cost(a.t, a.s, a.x, a.y, a.u, a.v); }

  /// Extended field (f, f0) in R^{n+1}.
  Vec f_ext(const Point& a) const {
    Vec r(n() + 1);
    r.head(n()) = f(a);
    r[n()] = f0(a);
    return r;
  }

  Mat jac_x(const Point& a) const { return def_.jac_x(a.t, a.s, a.x, a.y, a.u, a.v); }
  Mat jac_y(const Point& a) const { return def_.jac_y(a.t, a.s, a.x, a.y, a.u, a.v); }
  Mat jac_u(const Point& a) const { return def_.jac_u(a.t, a.s, a.x, a.y, a.u, a.v); }
  Mat jac_v(const Point& a) const { return def_.jac_v(a.t, a.s, a.x, a.y, a.u, a.v); }

  /// H = <p, f> + p0 f0.
  double hamiltonian(const Point& a, const Vec& p, double p0) const {
    if (p.size() != n()) throw DimensionMismatch("hamiltonian: adjoint has wrong size");
    return p.dot(f(a)) + p0 * f0(a);
  }

  /// Hamiltonian computed from the affine structure alone.
  double hamiltonian_affine(const Point& a, const Vec& p, double p0) const {
    if (!def_.affine) throw ConfigError("hamiltonian_affine: problem has no affine structure");
    return p.dot(affine_dynamics(a)) + p0 * affine_cost(a);
  }

  Vec affine_dynamics(const Point& a) const {
    const auto& s = *def_.affine;
    return s.drift(a.t, a.s, a.x, a.y) + s.f1(a.t, a.s, a.x, a.y) * a.u +
           s.f2(a.t, a.s, a.x, a.y) * a.v;
  }

  double affine_cost(const Point& a) const {
    const auto& s = *def_.affine;
    double c = s.cost_drift(a.t, a.s, a.x, a.y);
    if (s.cost_u) c += s.cost_u(a.t, a.s, a.x, a.y).dot(a.u);
    if (s.cost_v) c += s.cost_v(a.t, a.s, a.x, a.y).dot(a.v);
    return c + s.quad_u * a.u.squaredNorm() + s.quad_v * a.v.squaredNorm();
  }

  /// Gradients of H with respect to each argument: J^T (p, p0).
  Vec dH_dx(const Point& a, const Vec& p, double p0) const { return jac_x(a).transpose() * ext(p, p0); }
  Vec dH_dy(const Point& a, const Vec& p, double p0) const { return jac_y(a).transpose() * ext(p, p0); }
  Vec dH_du(const Point& a, const Vec& p, double p0) const { return jac_u(a).transpose() * ext(p, p0); }
  Vec dH_dv(const Point& a, const Vec& p, double p0) const { return jac_v(a).transpose() * ext(p, p0); }

  static Vec ext(const Vec& p, double p0) {
    Vec r(p.size() + 1);
    r.head(p.size()) = p;
    r[p.size()] = p0;
    return r;
  }

  /// Random evaluation point used by the construction checks and tests.
  template <class Rng>
  Point random_point(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, def_.check_state_scale);
    std::uniform_real_distribution<double> time(0.0, def_.final_time.t_f);
    Point a;
    a.t = time(rng);
    a.s = a.t - 0.5 * time(rng) / std::max(1.0, def_.final_time.t_f);
    a.x = Vec(n());
    a.y = Vec(n());
    for (Eigen::Index i = 0; i < n(); ++i) {
      a.x[i] = normal(rng);
      a.y[i] = normal(rng);
    }
    a.u = control_set().sample(rng);
    a.v = control_set().sample(rng);
    return a;
  }

  /// Central-difference Jacobian of the extended field with respect to
  /// argument slot 0 (x), 1 (y), 2 (u) or 3 (v).
  Mat fd_jacobian_at(const Point& a, int slot) const {
    auto g = [&](const Vec& z) {
      Point b = a;
      slot_ref(b, slot) = z;
      return f_ext(b);
    };
    Point copy = a;
    return detail::fd_columns(g, slot_ref(copy, slot));
  }

 private:
  static Vec& slot_ref(Point& a, int slot) {
    switch (slot) {
      case 0: return a.x;
      case 1: return a.y;
      case 2: return a.u;
      default: return a.v;
    }
  }

  JacobianFn fd_jacobian(int slot) const {
    // Captures the user callbacks, not `this`, so copies stay valid.
    DynamicsFn f = def_.dynamics;
    CostFn c = def_.running_cost;
    return [f, c, slot](double t, double s, const Vec& x, const Vec& y, const Vec& u,
                        const Vec& v) -> Mat {
      Point a{t, s, x, y, u, v};
      auto g = [&](const Vec& z) {
        Point b = a;
        slot_ref(b, slot) = z;
        Vec fv = f(b.t, b.s, b.x, b.y, b.u, b.v);
        Vec r(fv.size() + 1);
        r.head(fv.size()) = fv;
        r[fv.size()] = c(b.t, b.s, b.x, b.y, b.u, b.v);
        return r;
      };
      return detail::fd_columns(g, slot_ref(a, slot));
    };
  }

  void check_consistency(const bool supplied[4]) const {
    std::mt19937_64 rng(0x5eedULL);
    static const char* names[4] = {"jac_x", "jac_y", "jac_u", "jac_v"};
    for (int k = 0; k < 50; ++k) {
      Point a = random_point(rng);
      for (int slot = 0; slot < 4; ++slot) {
        if (!supplied[slot]) continue;
        Mat J = slot == 0 ? jac_x(a) : slot == 1 ? jac_y(a) : slot == 2 ? jac_u(a) : jac_v(a);
        const Eigen::Index cols = slot < 2 ? n() : m();
        if (J.rows() != n() + 1 || J.cols() != cols)
          throw DimensionMismatch(std::string("OcpProblem: ") + names[slot] + " has wrong shape");
        Mat Jfd = fd_jacobian_at(a, slot);
        const double scale = std::max(1.0, J.lpNorm<Eigen::Infinity>());
        if ((J - Jfd).lpNorm<Eigen::Infinity>() > 1e-5 * scale) {
          std::ostringstream os;
          os << "OcpProblem '" << def_.name << "': " << names[slot]
             << " disagrees with finite differences (max deviation "
             << (J - Jfd).lpNorm<Eigen::Infinity>() << ")";
          throw ConfigError(os.str());
        }
      }
    }
    if (def_.affine) {
      for (int k = 0; k < 20; ++k) {
        Point a = random_point(rng);
        Vec fa = f(a);
        const double df = (fa - affine_dynamics(a)).lpNorm<Eigen::Infinity>();
        const double dc = std::abs(f0(a) - affine_cost(a));
        const double scale = std::max(1.0, fa.lpNorm<Eigen::Infinity>() + std::abs(f0(a)));
        if (df > 1e-10 * scale || dc > 1e-10 * scale)
          throw ConfigError("OcpProblem '" + def_.name +
                            "': affine structure disagrees with the dynamics or cost");
      }
    }
  }

  OcpDefinition def_;
};

}  // namespace dpmp

#endif  // DPMP_OCP_HPP
