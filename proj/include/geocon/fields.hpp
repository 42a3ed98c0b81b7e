#pragma once

// Vector fields on a single global chart, Lie brackets, and RK4 flows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geocon/dual.hpp"
#include "geocon/errors.hpp"
#include "geocon/expr.hpp"

namespace geocon {

using Point = std::vector<double>;

struct TangentVector {
  Point base;
  std::vector<double> components;
};

struct Covector {
  Point base;
  std::vector<double> components;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("pairing of vectors with different dimensions");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::fabs(x));
  return m;
}

/// Coordinate pairing <p, v>.
inline double pairing(const Covector& p, const TangentVector& v) { return dot(p.components, v.components); }

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<Expr> components) : comps_(std::move(components)) {}

  static VectorField zero(std::size_t m) { return VectorField(std::vector<Expr>(m, Expr::constant(0.0))); }

  /// Unit coordinate field d/dx^i.
  static VectorField coordinate(std::size_t m, std::size_t i) {
    VectorField f = zero(m);
    f.comps_.at(i) = Expr::constant(1.0);
    return f;
  }

  static VectorField parse(const std::vector<std::string>& components, const std::vector<std::string>& vars) {
    std::vector<Expr> comps;
    comps.reserve(components.size());
    for (const auto& src : components) comps.push_back(parse_expression(src, vars));
    return VectorField(std::move(comps));
  }

  std::size_t dim() const { return comps_.size(); }
  const Expr& operator[](std::size_t i) const { return comps_[i]; }
  const std::vector<Expr>& components() const { return comps_; }

  bool is_zero() const {
    for (const auto& c : comps_)
      if (!fold(c).is_zero()) return false;
    return true;
  }

  template <class T>
  std::vector<T> eval(std::span<const T> x) const {
    if (x.size() != comps_.size())
      throw DimensionError("point of dimension " + std::to_string(x.size()) + " for field of dimension " +
                           std::to_string(comps_.size()));
    std::vector<T> out;
    out.reserve(comps_.size());
    for (const auto& c : comps_) out.push_back(evaluate<T>(c, x));
    return out;
  }

  template <class T>
  std::vector<T> eval(const std::vector<T>& x) const {
    return eval<T>(std::span<const T>(x));
  }

  std::vector<std::string> render() const {
    std::vector<std::string> out;
    for (const auto& c : comps_) out.push_back(c.to_string());
    return out;
  }

  friend VectorField operator+(const VectorField& a, const VectorField& b) {
    check_same(a, b);
    std::vector<Expr> c;
    for (std::size_t i = 0; i < a.dim(); ++i) c.push_back(a[i] + b[i]);
    return VectorField(std::move(c));
  }
  friend VectorField operator-(const VectorField& a, const VectorField& b) {
    check_same(a, b);
    std::vector<Expr> c;
    for (std::size_t i = 0; i < a.dim(); ++i) c.push_back(a[i] - b[i]);
    return VectorField(std::move(c));
  }
  friend VectorField operator-(const VectorField& a) {
    std::vector<Expr> c;
    for (const auto& e : a.comps_) c.push_back(-e);
    return VectorField(std::move(c));
  }
  friend VectorField operator*(double s, const VectorField& a) {
    std::vector<Expr> c;
    for (const auto& e : a.comps_) c.push_back(Expr::constant(s) * e);
    return VectorField(std::move(c));
  }

 private:
  static void check_same(const VectorField& a, const VectorField& b) {
    if (a.dim() != b.dim()) throw DimensionError("vector fields of different dimensions");
  }

  std::vector<Expr> comps_;
};

/// Componentwise evaluation at x.
inline TangentVector eval_vector_field(const VectorField& vf, const Point& x) {
  return {x, vf.eval<double>(x)};
}

/// Symbolic Jacobian J[i][j] = d vf^i / d x^j.
inline std::vector<std::vector<Expr>> jacobian(const VectorField& vf) {
  std::vector<std::vector<Expr>> J(vf.dim());
  for (std::size_t i = 0; i < vf.dim(); ++i)
    for (std::size_t j = 0; j < vf.dim(); ++j) J[i].push_back(differentiate(vf[i], static_cast<int>(j)));
  return J;
}

/// [a,b]^i = sum_j (a^j d b^i/dx^j - b^j d a^i/dx^j), i.e. Db.a - Da.b.
inline VectorField lie_bracket(const VectorField& a, const VectorField& b) {
  if (a.dim() != b.dim()) throw DimensionError("lie_bracket of fields with different dimensions");
  const std::size_t m = a.dim();
  std::vector<Expr> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Expr acc = Expr::constant(0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const int jj = static_cast<int>(j);
      if (!a[j].is_zero()) acc = acc + a[j] * differentiate(b[i], jj);
      if (!b[j].is_zero()) acc = acc - b[j] * differentiate(a[i], jj);
    }
    out.push_back(fold(acc));
  }
  return VectorField(std::move(out));
}

// ---------------------------------------------------------------------------
// Integration

inline constexpr double kDefaultStep = 1e-3;
inline constexpr double kMaxStepCount = 1e7;

struct FlowSpec {
  VectorField field;
  double duration = 0.0;
  double step = kDefaultStep;
};

namespace detail {

template <class S>
void axpy(std::vector<S>& out, const std::vector<S>& y, const S& a, const std::vector<S>& k) {
  out.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] + a * k[i];
}

template <class S>
void check_finite(const std::vector<S>& y, double t) {
  for (const auto& v : y)
    if (!all_finite(v)) throw DivergenceError("non-finite state during integration", t);
}

}  // namespace detail

/// One classical RK4 step of size dt for y' = rhs(t, y).
template <class S, class Rhs>
void rk4_step(const Rhs& rhs, double t, std::vector<S>& y, const S& dt) {
  const double h = scalar_value(dt);
  const S half = dt * S(0.5);
  std::vector<S> tmp;
  std::vector<S> k1 = rhs(t, y);
  detail::axpy(tmp, y, half, k1);
  std::vector<S> k2 = rhs(t + 0.5 * h, tmp);
  detail::axpy(tmp, y, half, k2);
  std::vector<S> k3 = rhs(t + 0.5 * h, tmp);
  detail::axpy(tmp, y, dt, k3);
  std::vector<S> k4 = rhs(t + h, tmp);
  const S sixth = dt / S(6.0);
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = y[i] + sixth * (k1[i] + S(2.0) * k2[i] + S(2.0) * k3[i] + k4[i]);
}

/// Integrates y' = rhs(t, y) from t0 over duration (may be negative) with
/// fixed steps of magnitude h and a final partial step landing exactly on
/// t0 + duration. For derivative-carrying durations the partial step carries
/// the derivative parts.
template <class S, class Rhs>
std::vector<S> integrate_rhs(const Rhs& rhs, std::vector<S> y, double t0, const S& duration, double h) {
  if (!(h > 0.0)) throw InvalidArgument("integration step must be positive");
  const double T = scalar_value(duration);
  if (!std::isfinite(T)) throw InvalidArgument("non-finite integration duration");
  if (std::fabs(T) / h > kMaxStepCount) throw InvalidArgument("integration would exceed the step-count cap");
  const double sign = T < 0.0 ? -1.0 : 1.0;
  const auto full = static_cast<long>(std::floor(std::fabs(T) / h));
  const S dt_full(sign * h);
  double t = t0;
  for (long i = 0; i < full; ++i) {
    rk4_step(rhs, t, y, dt_full);
    t = t0 + sign * h * static_cast<double>(i + 1);
    detail::check_finite(y, t);
  }
  S rest = duration - S(sign * h * static_cast<double>(full));
  if constexpr (std::is_same_v<S, double>) {
    if (rest == 0.0) return y;
  }
  rk4_step(rhs, t, y, rest);
  detail::check_finite(y, t0 + T);
  return y;
}

/// Flow of an autonomous field for a (possibly derivative-carrying) duration.
template <class S>
std::vector<S> flow(const VectorField& vf, const S& duration, std::vector<S> x, double h = kDefaultStep) {
  if (x.size() != vf.dim()) throw DimensionError("flow start point has wrong dimension");
  auto rhs = [&vf](double, const std::vector<S>& y) { return vf.eval<S>(std::span<const S>(y)); };
  return integrate_rhs<S>(rhs, std::move(x), 0.0, duration, h);
}

inline Point integrate_flow(const FlowSpec& spec, const Point& x0) {
  return flow<double>(spec.field, spec.duration, x0, spec.step);
}

/// Applies seq[0] for times[0] first, then seq[1], and so on.
template <class S>
std::vector<S> composite_flow(const std::vector<VectorField>& seq, const std::vector<S>& times, std::vector<S> x0,
                              double h = kDefaultStep) {
  if (seq.size() != times.size()) throw DimensionError("composite_flow: sequence and times differ in length");
  for (std::size_t i = 0; i < seq.size(); ++i) x0 = flow<S>(seq[i], times[i], std::move(x0), h);
  return x0;
}

inline Point composite_flow(const std::vector<VectorField>& seq, const std::vector<double>& times, const Point& x0,
                            double h = kDefaultStep) {
  return composite_flow<double>(seq, times, x0, h);
}

/// Transports v along the flow of xi0 for time dt by solving the variational
/// equation alongside the base flow (forward-mode seeding of the base point).
inline TangentVector pushforward_along_flow(const VectorField& xi0, double dt, const TangentVector& v,
                                            double h = kDefaultStep) {
  if (v.base.size() != xi0.dim() || v.components.size() != xi0.dim())
    throw DimensionError("pushforward: tangent vector has wrong dimension");
  using D = Dual<double>;
  std::vector<D> y;
  for (std::size_t i = 0; i < v.base.size(); ++i) y.emplace_back(v.base[i], v.components[i]);
  y = flow<D>(xi0, D(dt), std::move(y), h);
  TangentVector out;
  for (const auto& c : y) {
    out.base.push_back(c.v);
    out.components.push_back(c.d);
  }
  return out;
}

}  // namespace geocon
