#pragma once

// Control-affine systems xdot = X0(x) + sum_c u^c X_c(x), their Mayer
// extension by a running-cost coordinate x0, control schedules and reference
// trajectories.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geocon/errors.hpp"
#include "geocon/expr.hpp"
#include "geocon/fields.hpp"

namespace geocon {

using Control = std::vector<double>;

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

class ControlAffineSystem {
 public:
  ControlAffineSystem(std::vector<std::string> state_names, std::vector<std::string> control_names,
                      VectorField drift, std::vector<VectorField> inputs, std::vector<Bounds> box)
      : state_names_(std::move(state_names)),
        control_names_(std::move(control_names)),
        drift_(std::move(drift)),
        inputs_(std::move(inputs)),
        box_(std::move(box)) {
    const std::size_t m = state_names_.size();
    if (drift_.dim() != m) throw DimensionError("drift has dimension " + std::to_string(drift_.dim()) +
                                                ", chart has " + std::to_string(m));
    for (std::size_t c = 0; c < inputs_.size(); ++c)
      if (inputs_[c].dim() != m)
        throw DimensionError("input field X" + std::to_string(c + 1) + " has dimension " +
                             std::to_string(inputs_[c].dim()) + ", chart has " + std::to_string(m));
    if (box_.empty()) box_.resize(inputs_.size());
    if (box_.size() != inputs_.size()) throw DimensionError("control box size differs from input count");
    if (control_names_.empty())
      for (std::size_t c = 0; c < inputs_.size(); ++c) control_names_.push_back("u" + std::to_string(c + 1));
    if (control_names_.size() != inputs_.size()) throw DimensionError("control names differ from input count");
    for (const auto& b : box_)
      if (!(b.lower < b.upper)) throw InvalidArgument("control bounds must satisfy lower < upper");
    jacobians_.push_back(jacobian(drift_));
    for (const auto& f : inputs_) jacobians_.push_back(jacobian(f));
  }

  std::size_t m() const { return state_names_.size(); }
  std::size_t k() const { return inputs_.size(); }
  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<std::string>& control_names() const { return control_names_; }
  const VectorField& drift() const { return drift_; }
  const std::vector<VectorField>& inputs() const { return inputs_; }
  const VectorField& input(std::size_t c) const { return inputs_.at(c); }
  const std::vector<Bounds>& control_box() const { return box_; }

  /// Field index f: 0 is the drift, c >= 1 is input c.
  const VectorField& field(std::size_t f) const { return f == 0 ? drift_ : inputs_.at(f - 1); }
  /// Symbolic Jacobian of field(f).
  const std::vector<std::vector<Expr>>& field_jacobian(std::size_t f) const { return jacobians_.at(f); }

  bool contains_zero() const {
    return std::all_of(box_.begin(), box_.end(), [](const Bounds& b) { return b.lower < 0.0 && 0.0 < b.upper; });
  }

  /// Membership in the open control box.
  bool admissible(const Control& u) const {
    if (u.size() != k()) return false;
    for (std::size_t c = 0; c < k(); ++c)
      if (!(box_[c].lower < u[c] && u[c] < box_[c].upper)) return false;
    return true;
  }

  /// xi_u = X0 + sum_c u^c X_c with the control frozen.
  VectorField slice(const Control& u) const {
    if (u.size() != k()) throw DimensionError("control of size " + std::to_string(u.size()) + " for " +
                                              std::to_string(k()) + " inputs");
    VectorField f = drift_;
    for (std::size_t c = 0; c < k(); ++c)
      if (u[c] != 0.0) f = f + u[c] * inputs_[c];
    return VectorField([&] {
      std::vector<Expr> comps;
      for (const auto& e : f.components()) comps.push_back(fold(e));
      return comps;
    }());
  }

  template <class S>
  std::vector<S> velocity(std::span<const S> x, const Control& u) const {
    std::vector<S> v = drift_.eval<S>(x);
    for (std::size_t c = 0; c < k(); ++c) {
      if (u[c] == 0.0) continue;
      std::vector<S> w = inputs_[c].eval<S>(x);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] + S(u[c]) * w[i];
    }
    return v;
  }

 private:
  std::vector<std::string> state_names_;
  std::vector<std::string> control_names_;
  VectorField drift_;
  std::vector<VectorField> inputs_;
  std::vector<Bounds> box_;
  std::vector<std::vector<std::vector<Expr>>> jacobians_;
};

struct SystemSpec {
  std::vector<std::string> state_names;
  std::vector<std::string> control_names;
  std::vector<std::string> drift;                // empty means zero drift
  std::vector<std::vector<std::string>> inputs;  // one component list per input
  std::vector<Bounds> box;                       // empty means unbounded
};

inline ControlAffineSystem build_control_affine(const SystemSpec& spec) {
  const std::size_t m = spec.state_names.size();
  if (m == 0) throw DimensionError("empty chart");
  VectorField drift = spec.drift.empty() ? VectorField::zero(m) : VectorField::parse(spec.drift, spec.state_names);
  std::vector<VectorField> inputs;
  for (const auto& comps : spec.inputs) inputs.push_back(VectorField::parse(comps, spec.state_names));
  return ControlAffineSystem(spec.state_names, spec.control_names, std::move(drift), std::move(inputs), spec.box);
}

/// Mayer extension: coordinate x0 prepended with x0dot = F(x, u).
class ExtendedSystem {
 public:
  ExtendedSystem(ControlAffineSystem base, Expr cost) : base_(std::move(base)), cost_(std::move(cost)) {
    const int m = static_cast<int>(base_.m());
    const int k = static_cast<int>(base_.k());
    for (const auto& [idx, name] : free_variables(cost_))
      if (idx >= m + k) throw InvalidArgument("cost refers to undeclared variable '" + name + "'");
    for (int j = 0; j < m; ++j) cost_dx_.push_back(differentiate(cost_, j));
    for (int c = 0; c < k; ++c) cost_du_.push_back(differentiate(cost_, m + c));
    names_.push_back("x0");
    for (const auto& n : base_.state_names()) names_.push_back(n);
  }

  static ExtendedSystem parse(ControlAffineSystem base, const std::string& cost) {
    std::vector<std::string> vars = base.state_names();
    for (const auto& c : base.control_names()) vars.push_back(c);
    Expr e = parse_expression(cost, vars);
    return ExtendedSystem(std::move(base), std::move(e));
  }

  const ControlAffineSystem& base() const { return base_; }
  const Expr& cost() const { return cost_; }
  std::size_t dim() const { return base_.m() + 1; }
  /// Chart of the extended state (x0 first).
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Expr>& cost_dx() const { return cost_dx_; }
  const std::vector<Expr>& cost_du() const { return cost_du_; }

  double cost_value(std::span<const double> x, const Control& u) const { return eval_xu(cost_, x, u); }
  double cost_dx(std::size_t j, std::span<const double> x, const Control& u) const {
    return eval_xu(cost_dx_.at(j), x, u);
  }
  double cost_du(std::size_t c, std::span<const double> x, const Control& u) const {
    return eval_xu(cost_du_.at(c), x, u);
  }

  /// Cost with the control substituted, as an expression in the extended chart.
  Expr cost_slice(const Control& u) const {
    const int m = static_cast<int>(base_.m());
    return fold(substitute(cost_, [&](int i, const std::string& name) {
      if (i < m) return Expr::variable(i + 1, name);
      return Expr::constant(u.at(static_cast<std::size_t>(i - m)));
    }));
  }

  /// X^ = F d/dx0 + X at a frozen control, on the extended chart. Generally
  /// not control-affine when F is nonlinear in u.
  VectorField extended_field(const Control& u) const {
    std::vector<Expr> comps{cost_slice(u)};
    for (const auto& e : base_.slice(u).components()) comps.push_back(shift_variables(e, 1));
    return VectorField(std::move(comps));
  }

  /// X^(x^, u) evaluated directly; x_hat includes x0.
  std::vector<double> eval(std::span<const double> x_hat, const Control& u) const {
    auto x = x_hat.subspan(1);
    std::vector<double> out{cost_value(x, u)};
    for (double v : base_.velocity<double>(x, u)) out.push_back(v);
    return out;
  }

 private:
  double eval_xu(const Expr& e, std::span<const double> x, const Control& u) const {
    std::vector<double> env(x.begin(), x.end());
    env.insert(env.end(), u.begin(), u.end());
    return evaluate<double>(e, env);
  }

  ControlAffineSystem base_;
  Expr cost_;
  std::vector<Expr> cost_dx_;
  std::vector<Expr> cost_du_;
  std::vector<std::string> names_;
};

inline ExtendedSystem extend_system(const ControlAffineSystem& sys, const Expr& cost) {
  return ExtendedSystem(sys, cost);
}

// ---------------------------------------------------------------------------
// Control schedules

/// Either piecewise-constant (value i applies on [start_i, start_{i+1})) or
/// one expression per component in the variable t.
class ControlSchedule {
 public:
  ControlSchedule() = default;

  static ControlSchedule piecewise(std::vector<std::pair<double, Control>> pieces) {
    if (pieces.empty()) throw InvalidArgument("empty control schedule");
    for (std::size_t i = 1; i < pieces.size(); ++i)
      if (!(pieces[i].first > pieces[i - 1].first))
        throw InvalidArgument("control schedule breakpoints must be strictly increasing");
    ControlSchedule s;
    s.pieces_ = std::move(pieces);
    return s;
  }

  static ControlSchedule constant(Control u) { return piecewise({{0.0, std::move(u)}}); }

  static ControlSchedule expressions(std::vector<Expr> comps) {
    ControlSchedule s;
    s.exprs_ = std::move(comps);
    return s;
  }

  bool is_piecewise_constant() const { return !pieces_.empty(); }
  const std::vector<std::pair<double, Control>>& pieces() const { return pieces_; }
  const std::vector<Expr>& expressions() const { return exprs_; }

  std::size_t size() const { return pieces_.empty() ? exprs_.size() : pieces_.front().second.size(); }

  Control at(double t) const {
    if (!pieces_.empty()) {
      std::size_t i = 0;
      while (i + 1 < pieces_.size() && pieces_[i + 1].first <= t) ++i;
      return pieces_[i].second;
    }
    Control u;
    const std::vector<double> env{t};
    for (const auto& e : exprs_) u.push_back(evaluate<double>(e, env));
    return u;
  }

  /// Breakpoints strictly inside (a, b).
  std::vector<double> breakpoints(double a, double b) const {
    std::vector<double> out;
    for (std::size_t i = 1; i < pieces_.size(); ++i)
      if (pieces_[i].first > a && pieces_[i].first < b) out.push_back(pieces_[i].first);
    return out;
  }

  bool is_breakpoint(double t, double tol = 1e-12) const {
    for (std::size_t i = 1; i < pieces_.size(); ++i)
      if (std::fabs(pieces_[i].first - t) <= tol) return true;
    return false;
  }

 private:
  std::vector<std::pair<double, Control>> pieces_;
  std::vector<Expr> exprs_;
};

struct Trajectory {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> times;
  std::vector<Point> points;
  ControlSchedule schedule;
  double step = kDefaultStep;
};

namespace detail {

/// Splits [t0, t1] at schedule breakpoints; returns consecutive segment ends.
inline std::vector<double> segment_ends(const ControlSchedule& sched, double t0, double t1) {
  std::vector<double> ends;
  double lo = std::min(t0, t1);
  double hi = std::max(t0, t1);
  for (double bp : sched.breakpoints(lo, hi)) ends.push_back(bp);
  if (t1 < t0) std::reverse(ends.begin(), ends.end());
  ends.push_back(t1);
  return ends;
}

/// Right-hand side of the reference dynamics on the segment [s0, s1]: the
/// piecewise-constant value is taken at the segment midpoint.
template <class S>
auto reference_rhs(const ControlAffineSystem& sys, const ControlSchedule& sched, double s0, double s1) {
  std::optional<Control> frozen;
  if (sched.is_piecewise_constant()) frozen = sched.at(0.5 * (s0 + s1));
  return [&sys, &sched, frozen](double t, const std::vector<S>& y) {
    const Control u = frozen ? *frozen : sched.at(t);
    return sys.velocity<S>(std::span<const S>(y), u);
  };
}

}  // namespace detail

/// Integrates the reference from x0 over [a, b], recording every RK4 step
/// and landing exactly on schedule breakpoints.
inline Trajectory simulate_reference(const ControlAffineSystem& sys, const ControlSchedule& schedule, const Point& x0,
                                     double a, double b, double h = kDefaultStep) {
  if (x0.size() != sys.m()) throw DimensionError("initial point has wrong dimension");
  if (schedule.size() != sys.k()) throw DimensionError("control schedule has wrong number of components");
  if (!(b >= a)) throw InvalidArgument("reference interval must satisfy a <= b");
  if (!(h > 0.0)) throw InvalidArgument("integration step must be positive");
  if ((b - a) / h > kMaxStepCount) throw InvalidArgument("integration would exceed the step-count cap");
  Trajectory traj{a, b, {a}, {x0}, schedule, h};
  Point y = x0;
  double t = a;
  for (double end : detail::segment_ends(schedule, a, b)) {
    auto rhs = detail::reference_rhs<double>(sys, schedule, t, end);
    const double seg_start = t;
    const auto full = static_cast<long>(std::floor((end - seg_start) / h));
    for (long i = 0; i <= full; ++i) {
      double next = i < full ? seg_start + h * static_cast<double>(i + 1) : end;
      if (next <= t) continue;
      rk4_step<double>(rhs, t, y, next - t);
      detail::check_finite(y, next);
      t = next;
      traj.times.push_back(t);
      traj.points.push_back(y);
    }
  }
  return traj;
}

/// State of the reference at time t (re-integrated from the preceding sample).
inline Point state_at(const ControlAffineSystem& sys, const Trajectory& traj, double t) {
  if (t < traj.a - 1e-12 || t > traj.b + 1e-12) throw InvalidArgument("time outside the reference interval");
  auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  std::size_t i = it == traj.times.begin() ? 0 : static_cast<std::size_t>(it - traj.times.begin()) - 1;
  if (traj.times[i] == t) return traj.points[i];
  auto rhs = detail::reference_rhs<double>(sys, traj.schedule, traj.times[i], t);
  return integrate_rhs<double>(rhs, traj.points[i], traj.times[i], t - traj.times[i], traj.step);
}

/// Transports a tangent vector along the (possibly piecewise) reference flow
/// from t0 to t1 via the variational equation.
inline TangentVector transport_along_reference(const ControlAffineSystem& sys, const Trajectory& traj, double t0,
                                               double t1, const TangentVector& v) {
  using D = Dual<double>;
  std::vector<D> y;
  for (std::size_t i = 0; i < v.base.size(); ++i) y.emplace_back(v.base[i], v.components[i]);
  double t = t0;
  for (double end : detail::segment_ends(traj.schedule, t0, t1)) {
    auto rhs = detail::reference_rhs<D>(sys, traj.schedule, t, end);
    y = integrate_rhs<D>(rhs, std::move(y), t, D(end - t), traj.step);
    t = end;
  }
  TangentVector out;
  for (const auto& c : y) {
    out.base.push_back(c.v);
    out.components.push_back(c.d);
  }
  return out;
}

}  // namespace geocon
