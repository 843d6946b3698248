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

// Uniform time grids, sampled vector functions and the delayed / advanced
// evaluation rules every other module builds on.

#ifndef DPMP_TIME_MESH_HPP
#define DPMP_TIME_MESH_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpmp/errors.hpp"

namespace dpmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Absolute slack used for every "is t inside [a, b]" decision. Grid nodes are
/// computed as a + k h, so endpoint comparisons need a few ulps of room.
inline double time_slack(double a, double b) {
  return 1e-11 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// Uniform grid t_start = t_0 < t_1 < ... < t_N = t_end.
class TimeGrid {
 public:
  TimeGrid() = default;

  TimeGrid(double t_start, double t_end, std::size_t n_steps)
      : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
    if (n_steps == 0) throw ConfigError("TimeGrid: n_steps must be positive");
    if (!(t_end > t_start) || !std::isfinite(t_start) || !std::isfinite(t_end))
      throw ConfigError("TimeGrid: need finite t_start < t_end");
    step_ = (t_end - t_start) / static_cast<double>(n_steps);
  }

  /// Smallest uniform grid on [t_start, t_end] whose step does not exceed
  /// `max_step`.
  static TimeGrid with_max_step(double t_start, double t_end, double max_step) {
    if (!(max_step > 0)) throw ConfigError("TimeGrid: max_step must be positive");
    const double ratio = (t_end - t_start) / max_step;
    auto n = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
    return TimeGrid(t_start, t_end, std::max<std::size_t>(n, 1));
  }

  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  double step() const noexcept { return step_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t size() const noexcept { return n_steps_ + 1; }

  double node(std::size_t k) const noexcept {
    return k == n_steps_ ? t_end_ : t_start_ + static_cast<double>(k) * step_;
  }

  bool contains(double t) const noexcept {
    const double eps = time_slack(t_start_, t_end_);
    return t >= t_start_ - eps && t <= t_end_ + eps;
  }

  /// Index k of the cell [t_k, t_{k+1}) holding t; the last cell is closed.
  std::size_t cell(double t) const noexcept {
    const double r = (t - t_start_) / step_;
    if (!(r > 0)) return 0;
    auto k = static_cast<std::size_t>(std::floor(r));
    return std::min(k, n_steps_ - 1);
  }

  /// Nearest node index when t is within slack of a node, otherwise nullopt.
  std::optional<std::size_t> node_index(double t) const noexcept {
    const double r = (t - t_start_) / step_;
    const double k = std::round(r);
    if (k < 0 || k > static_cast<double>(n_steps_)) return std::nullopt;
    if (std::abs(node(static_cast<std::size_t>(k)) - t) <= time_slack(t_start_, t_end_))
      return static_cast<std::size_t>(k);
    return std::nullopt;
  }

 private:
  double t_start_ = 0.0;
  double t_end_ = 1.0;
  std::size_t n_steps_ = 1;
  double step_ = 1.0;
};

enum class Interp { piecewise_constant, linear, cubic_hermite };

inline const char* to_string(Interp i) {
  switch (i) {
    case Interp::piecewise_constant: return "piecewise-constant";
    case Interp::linear: return "linear";
    case Interp::cubic_hermite: return "cubic-hermite";
  }
  return "?";
}

/// Vector-valued function sampled on a uniform grid. Immutable once built.
///
/// Piecewise-constant interpolation is right-continuous: the value at node k
/// holds on [t_k, t_{k+1}). Cubic Hermite interpolation needs the derivative
/// at every node.
class SampledFunction {
 public:
  SampledFunction() = default;

  SampledFunction(TimeGrid grid, Mat values, Interp interp)
      : grid_(grid), values_(std::move(values)), interp_(interp) {
    if (interp == Interp::cubic_hermite)
      throw ConfigError("SampledFunction: cubic-hermite needs node derivatives");
    check_shape();
  }

  SampledFunction(TimeGrid grid, Mat values, Mat derivatives)
      : grid_(grid),
        values_(std::move(values)),
        derivs_(std::move(derivatives)),
        interp_(Interp::cubic_hermite) {
    check_shape();
    if (derivs_.rows() != values_.rows() || derivs_.cols() != values_.cols())
      throw DimensionMismatch("SampledFunction: derivative array shape differs from values");
  }

  static SampledFunction constant(const TimeGrid& grid, const Vec& c, Interp interp) {
    Mat v = c.replicate(1, static_cast<Eigen::Index>(grid.size()));
    if (interp == Interp::cubic_hermite)
      return SampledFunction(grid, std::move(v), Mat::Zero(c.size(), v.cols()));
    return SampledFunction(grid, std::move(v), interp);
  }

  static SampledFunction sample(const TimeGrid& grid, const std::function<Vec(double)>& fn,
                                Interp interp) {
    if (interp == Interp::cubic_hermite)
      throw ConfigError("SampledFunction::sample: use sample_hermite for cubic-hermite");
    return SampledFunction(grid, tabulate(grid, fn), interp);
  }

  static SampledFunction sample_hermite(const TimeGrid& grid,
                                        const std::function<Vec(double)>& fn,
                                        const std::function<Vec(double)>& dfn) {
    return SampledFunction(grid, tabulate(grid, fn), tabulate(grid, dfn));
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  Interp interp() const noexcept { return interp_; }
  Eigen::Index dim() const noexcept { return values_.rows(); }
  const Mat& values() const noexcept { return values_; }
  const Mat& derivatives() const noexcept { return derivs_; }
  double t_start() const noexcept { return grid_.t_start(); }
  double t_end() const noexcept { return grid_.t_end(); }
  bool contains(double t) const noexcept { return grid_.contains(t); }
  Vec node_value(std::size_t k) const { return values_.col(static_cast<Eigen::Index>(k)); }

  Vec eval(double t) const {
    if (!grid_.contains(t)) {
      std::ostringstream os;
      os << std::setprecision(17) << "evaluation at t=" << t << " outside ["
         << grid_.t_start() << ", " << grid_.t_end() << "]";
      throw OutOfDomain(os.str());
    }
    if (auto k = grid_.node_index(t)) return values_.col(static_cast<Eigen::Index>(*k));
    const std::size_t k = grid_.cell(t);
    const auto c = static_cast<Eigen::Index>(k);
    const double h = grid_.step();
    const double s = std::clamp((t - grid_.node(k)) / h, 0.0, 1.0);
    switch (interp_) {
      case Interp::piecewise_constant:
        return values_.col(c);
      case Interp::linear:
        return (1.0 - s) * values_.col(c) + s * values_.col(c + 1);
      case Interp::cubic_hermite: {
        const double s2 = s * s, s3 = s2 * s;
        const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
        const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
        return h00 * values_.col(c) + h10 * h * derivs_.col(c) + h01 * values_.col(c + 1) +
               h11 * h * derivs_.col(c + 1);
      }
    }
    return values_.col(c);
  }

  /// Same samples with a different (non-Hermite) interpolation rule.
  SampledFunction with_interp(Interp interp) const {
    if (interp == interp_) return *this;
    if (interp == Interp::cubic_hermite)
      throw ConfigError("with_interp: derivatives unknown for cubic-hermite");
    return SampledFunction(grid_, values_, interp);
  }

 private:
  static Mat tabulate(const TimeGrid& grid, const std::function<Vec(double)>& fn) {
    Vec first = fn(grid.node(0));
    Mat v(first.size(), static_cast<Eigen::Index>(grid.size()));
    v.col(0) = first;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      Vec vk = fn(grid.node(k));
      if (vk.size() != first.size())
        throw DimensionMismatch("SampledFunction: sampled values change dimension");
      v.col(static_cast<Eigen::Index>(k)) = vk;
    }
    return v;
  }

  void check_shape() const {
    if (values_.cols() != static_cast<Eigen::Index>(grid_.size()))
      throw DimensionMismatch("SampledFunction: values count differs from grid node count");
  }

  TimeGrid grid_;
  Mat values_;
  Mat derivs_;
  Interp interp_ = Interp::linear;
};

/// A history segment on [-Delta, 0] glued in front of a solution segment on
/// [0, t_f]. Evaluation dispatches on the sign of t, so delayed reads that
/// cross t = 0 need no special casing in callers.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(SampledFunction body) : body_(std::move(body)) {}
  Trajectory(SampledFunction history, SampledFunction body)
      : history_(std::move(history)), body_(std::move(body)) {
    if (history_->dim() != body_.dim())
      throw DimensionMismatch("Trajectory: history and body dimensions differ");
    if (std::abs(history_->t_end() - body_.t_start()) >
        time_slack(history_->t_end(), body_.t_start()))
      throw ConfigError("Trajectory: history must end where the body starts");
  }

  const std::optional<SampledFunction>& history() const noexcept { return history_; }
  const SampledFunction& body() const noexcept { return body_; }
  Eigen::Index dim() const noexcept { return body_.dim(); }
  double t_start() const noexcept { return history_ ? history_->t_start() : body_.t_start(); }
  double t_end() const noexcept { return body_.t_end(); }
  bool contains(double t) const noexcept {
    return (history_ && history_->contains(t)) || body_.contains(t);
  }

  Vec eval(double t) const {
    if (history_ && t < body_.t_start() - time_slack(body_.t_start(), body_.t_end()))
      return history_->eval(t);
    return body_.eval(t);
  }

  /// Like eval, but side < 0 at the junction t = 0 reads the history end.
  Vec eval(double t, int side) const {
    if (side < 0 && history_ && std::abs(t - body_.t_start()) <= time_slack(body_.t_start(), body_.t_end()))
      return history_->eval(t);
    return eval(t);
  }

 private:
  std::optional<SampledFunction> history_;
  SampledFunction body_;
};

/// Constant delays (tau0, tau1, tau2) in [0, delta]^3.
///   tau0 enters the second time argument s = t - tau0,
///   tau1 delays the state, tau2 delays the control.
struct DelayVector {
  double tau0 = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double delta = 1.0;

  DelayVector() = default;
  DelayVector(double t0, double t1, double t2, double bound)
      : tau0(t0), tau1(t1), tau2(t2), delta(bound) {
    validate();
  }

  void validate() const {
    if (!(delta > 0) || !std::isfinite(delta))
      throw ConfigError("DelayVector: delay bound must be positive");
    const double eps = time_slack(0.0, delta);
    for (double d : {tau0, tau1, tau2}) {
      if (!std::isfinite(d) || d < 0.0 || d > delta + eps) {
        std::ostringstream os;
        os << "DelayVector: every delay must lie in [0, " << delta << "], got (" << tau0
           << ", " << tau1 << ", " << tau2 << ")";
        throw ConfigError(os.str());
      }
    }
  }

  DelayVector scaled(double s) const { return {s * tau0, s * tau1, s * tau2, delta}; }
  bool is_zero() const noexcept { return tau0 == 0.0 && tau1 == 0.0 && tau2 == 0.0; }

  /// Smallest strictly positive lag used for interpolated reads (tau1, tau2);
  /// +inf when both vanish. tau0 only shifts an explicit time argument.
  double min_interpolated_lag() const noexcept {
    double m = std::numeric_limits<double>::infinity();
    if (tau1 > 0) m = std::min(m, tau1);
    if (tau2 > 0) m = std::min(m, tau2);
    return m;
  }

  friend bool operator==(const DelayVector&, const DelayVector&) = default;
};

/// f(t - lag). Reads before t = 0 land in the history segment.
template <class F>
Vec eval_delayed(const F& f, double t, double lag) {
  if (lag < 0) throw ConfigError("eval_delayed: negative lag");
  const double tq = t - lag;
  if (tq < f.t_start() - time_slack(f.t_start(), f.t_end())) {
    std::ostringstream os;
    os << std::setprecision(17) << "delayed read at t-lag=" << tq << " precedes history start "
       << f.t_start();
    throw OutOfDomain(os.str());
  }
  return f.eval(tq);
}

struct AdvancedValue {
  Vec value;
  int indicator = 0;
};

/// f(t + lead) gated by the indicator of [0, horizon - lead]. Beyond the
/// horizon the value is the zero vector and the indicator is 0, so advanced
/// terms vanish exactly instead of being extrapolated.
template <class F>
AdvancedValue eval_advanced(const F& f, double t, double lead, double horizon) {
  if (!f.contains(t)) {
    std::ostringstream os;
    os << std::setprecision(17) << "advanced read at t=" << t << " outside ["
       << f.t_start() << ", " << f.t_end() << "]";
    throw OutOfDomain(os.str());
  }
  if (t + lead > horizon + time_slack(0.0, horizon))
    return {Vec::Zero(f.dim()), 0};
  return {f.eval(std::min(t + lead, f.t_end())), 1};
}

/// 1 on [0, horizon - lead] and 0 after, with the same slack eval_advanced uses.
inline int advanced_indicator(double t, double lead, double horizon) {
  return t + lead > horizon + time_slack(0.0, horizon) ? 0 : 1;
}

/// One-sided limit of the indicator: side < 0 from the left, side > 0 from
/// the right, 0 for the closed-interval value.
inline int advanced_indicator(double t, double lead, double horizon, int side) {
  if (side != 0 && std::abs(t + lead - horizon) <= time_slack(0.0, horizon)) return side < 0 ? 1 : 0;
  return advanced_indicator(t, lead, horizon);
}

// CSV: header "t,<name_1>,...,<name_d>", one row per node, 17 significant
// digits.

inline void write_csv(std::ostream& os, const SampledFunction& f,
                      const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != f.dim())
    throw DimensionMismatch("write_csv: one name per component required");
  os << "t";
  for (const auto& n : names) os << ',' << n;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < f.grid().size(); ++k) {
    os << f.grid().node(k);
    for (Eigen::Index i = 0; i < f.dim(); ++i)
      os << ',' << f.values()(i, static_cast<Eigen::Index>(k));
    os << '\n';
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv_table(std::istream& is) {
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  if (table.header.empty() || table.header.front() != "t")
    throw ConfigError("csv: first header column must be 't'");
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size())
        throw ConfigError("csv: malformed number on line " + std::to_string(line_no));
      row.push_back(v);
    }
    if (row.size() != table.header.size())
      throw ConfigError("csv: wrong column count on line " + std::to_string(line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.rows.size() < 2) throw ConfigError("csv: need at least two rows");
  return table;
}

/// Grid recovered from the time column of a table; rejects non-uniform data.
inline TimeGrid grid_from_times(const std::vector<double>& t) {
  if (t.size() < 2) throw ConfigError("csv: need at least two nodes");
  TimeGrid g(t.front(), t.back(), t.size() - 1);
  const double tol = 1e-9 * std::max(1.0, g.step()) + 1e-6 * g.step();
  for (std::size_t k = 0; k < t.size(); ++k)
    if (std::abs(t[k] - g.node(k)) > tol) throw ConfigError("csv: time column is not uniform");
  return g;
}

inline SampledFunction read_csv(std::istream& is, Interp interp,
                                std::vector<std::string>* names = nullptr) {
  CsvTable table = read_csv_table(is);
  std::vector<double> t;
  for (const auto& r : table.rows) t.push_back(r[0]);
  TimeGrid g = grid_from_times(t);
  const auto d = static_cast<Eigen::Index>(table.header.size() - 1);
  Mat v(d, static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t k = 0; k < table.rows.size(); ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      v(i, static_cast<Eigen::Index>(k)) = table.rows[k][static_cast<std::size_t>(i) + 1];
  if (names) names->assign(table.header.begin() + 1, table.header.end());
  return SampledFunction(g, std::move(v), interp);
}

}  // namespace dpmp

#endif  // DPMP_TIME_MESH_HPP
