#pragma once

// Hamiltonian lifts of control-affine systems, biextremal integration,
// extremal classification and the necessary-condition audit.
//
// Coordinates of the symplectic form are paired as dx^i ^ dp_i, so Hamilton's
// equations read xdot = dH/dp, pdot = -dH/dx.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geocon/cone.hpp"
#include "geocon/errors.hpp"
#include "geocon/fields.hpp"
#include "geocon/system.hpp"

namespace geocon {

enum class Mode { Reduced, Extended };

inline const char* to_string(Mode m) { return m == Mode::Reduced ? "reduced" : "extended"; }

/// A control-affine system together with the Hamiltonian mode used to lift
/// it. Extended mode needs a cost; the covector then carries p0 first.
class HamiltonianModel {
 public:
  explicit HamiltonianModel(ControlAffineSystem sys) : base_(std::move(sys)) {}
  explicit HamiltonianModel(ExtendedSystem ext) : base_(ext.base()), ext_(std::move(ext)) {}

  Mode mode() const { return ext_ ? Mode::Extended : Mode::Reduced; }
  const ControlAffineSystem& base() const { return base_; }
  const ExtendedSystem& extended() const {
    if (!ext_) throw InvalidArgument("reduced model has no cost");
    return *ext_;
  }
  /// Dimension of the (possibly extended) state and of the covector.
  std::size_t dim() const { return base_.m() + (ext_ ? 1 : 0); }

  /// H = p0 F(x, u) + <p, X0 + sum u^c X_c>. x may include x0 in extended mode.
  double hamiltonian(std::span<const double> lambda, std::span<const double> x, const Control& u) const {
    check_covector(lambda);
    const auto xs = spatial(x);
    const auto f = base_.velocity<double>(xs, u);
    if (!ext_) return dot(lambda, f);
    return lambda[0] * ext_->cost_value(xs, u) + dot(lambda.subspan(1), f);
  }

  /// dH/du^c = p0 dF/du^c + <p, X_c>.
  std::vector<double> dH_du(std::span<const double> lambda, std::span<const double> x, const Control& u) const {
    check_covector(lambda);
    const auto xs = spatial(x);
    const auto p = ext_ ? lambda.subspan(1) : lambda;
    std::vector<double> out(base_.k());
    for (std::size_t c = 0; c < base_.k(); ++c) {
      out[c] = dot(p, base_.input(c).eval<double>(xs));
      if (ext_) out[c] += lambda[0] * ext_->cost_du(c, xs, u);
    }
    return out;
  }

  /// Derivative of the stacked state (x^, lambda^) at a frozen control.
  std::vector<double> rhs(std::span<const double> y, const Control& u) const {
    const std::size_t n = dim();
    const std::size_t m = base_.m();
    if (y.size() != 2 * n) throw DimensionError("Hamiltonian state has wrong dimension");
    if (u.size() != base_.k()) throw DimensionError("control has wrong number of components");
    const auto xh = y.subspan(0, n);
    const auto lam = y.subspan(n, n);
    const auto xs = spatial(xh);
    const std::size_t off = ext_ ? 1 : 0;
    const auto p = lam.subspan(off);

    std::vector<double> out(2 * n, 0.0);
    const auto f = base_.velocity<double>(xs, u);
    if (ext_) out[0] = ext_->cost_value(xs, u);
    for (std::size_t i = 0; i < m; ++i) out[off + i] = f[i];

    // pdot_j = -sum_i p_i dfi/dx^j  (- p0 dF/dx^j in extended mode); pdot_0 = 0.
    const std::vector<double> xv(xs.begin(), xs.end());
    for (std::size_t field = 0; field <= base_.k(); ++field) {
      const double w = field == 0 ? 1.0 : u[field - 1];
      if (w == 0.0) continue;
      const auto& J = base_.field_jacobian(field);
      for (std::size_t i = 0; i < m; ++i) {
        if (p[i] == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) {
          if (J[i][j].is_zero()) continue;
          out[n + off + j] -= w * p[i] * evaluate<double>(J[i][j], xv);
        }
      }
    }
    if (ext_ && lam[0] != 0.0)
      for (std::size_t j = 0; j < m; ++j) out[n + off + j] -= lam[0] * ext_->cost_dx(j, xs, u);
    return out;
  }

  std::span<const double> spatial(std::span<const double> x) const {
    if (x.size() == base_.m()) return x;
    if (ext_ && x.size() == base_.m() + 1) return x.subspan(1);
    throw DimensionError("point has wrong dimension for the Hamiltonian model");
  }

 private:
  void check_covector(std::span<const double> lambda) const {
    if (lambda.size() != dim())
      throw DimensionError("covector of dimension " + std::to_string(lambda.size()) + ", expected " +
                           std::to_string(dim()));
  }

  ControlAffineSystem base_;
  std::optional<ExtendedSystem> ext_;
};

/// Reduced-mode Hamiltonian <lambda, X0 + sum u^c X_c>(x).
inline double hamiltonian(const Covector& lambda, const Point& x, const Control& u, const ControlAffineSystem& sys) {
  return HamiltonianModel(sys).hamiltonian(lambda.components, x, u);
}

inline std::vector<double> hamilton_rhs(const HamiltonianModel& model, const std::vector<double>& y, const Control& u) {
  return model.rhs(y, u);
}

struct Biextremal {
  Mode mode = Mode::Reduced;
  std::vector<double> times;
  std::vector<Point> states;                 // x^ (x0 first in extended mode)
  std::vector<std::vector<double>> momenta;  // lambda^ (p0 first in extended mode)
  ControlSchedule schedule;

  std::optional<double> lambda0() const {
    if (mode != Mode::Extended || momenta.empty()) return std::nullopt;
    return momenta.front()[0];
  }

  /// Index of the sample at time t, if one exists within tol.
  std::optional<std::size_t> sample_at(double t, double tol = 1e-12) const {
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::fabs(times[i] - t) <= tol) return i;
    return std::nullopt;
  }
};

/// RK4 on the coupled state-momentum system over [a, b]. Integration restarts
/// at control breakpoints and at every extra stop time, landing on each
/// exactly. Throws DegeneracyError when the momentum vanishes.
inline Biextremal integrate_biextremal(const HamiltonianModel& model, const Point& x0,
                                       const std::vector<double>& lambda0, const ControlSchedule& schedule,
                                       double a, double b, double h = kDefaultStep,
                                       const std::vector<double>& extra_stops = {}) {
  constexpr double kZeroMomentum = 1e-12;
  const std::size_t n = model.dim();
  Point xh = x0;
  if (model.mode() == Mode::Extended && xh.size() == model.base().m()) xh.insert(xh.begin(), 0.0);
  if (xh.size() != n) throw DimensionError("initial point has wrong dimension");
  if (lambda0.size() != n) throw DimensionError("initial covector has wrong dimension");
  if (schedule.size() != model.base().k()) throw DimensionError("control schedule has wrong number of components");
  if (!(b >= a)) throw InvalidArgument("interval must satisfy a <= b");
  if (!(h > 0.0)) throw InvalidArgument("integration step must be positive");
  if ((b - a) / h > kMaxStepCount) throw InvalidArgument("integration would exceed the step-count cap");
  if (model.mode() == Mode::Extended && lambda0[0] > 0.0)
    throw InvariantViolation("cost multiplier p0 must be nonpositive");

  Biextremal bx{model.mode(), {a}, {xh}, {lambda0}, schedule};
  auto check_momentum = [&](const std::vector<double>& lam, double t) {
    if (norm(lam) < kZeroMomentum) throw DegeneracyError("momentum vanished along the biextremal", t);
  };
  check_momentum(lambda0, a);

  std::vector<double> ends = schedule.breakpoints(a, b);
  for (double t : extra_stops)
    if (t > a && t < b) ends.push_back(t);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  ends.push_back(b);

  std::vector<double> y(xh);
  y.insert(y.end(), lambda0.begin(), lambda0.end());
  double t = a;
  for (double end : ends) {
    if (end <= t) continue;
    const bool frozen = schedule.is_piecewise_constant();
    const Control u_seg = frozen ? schedule.at(0.5 * (t + end)) : Control{};
    auto rhs = [&](double tt, const std::vector<double>& yy) {
      return model.rhs(yy, frozen ? u_seg : schedule.at(tt));
    };
    const double seg_start = t;
    const auto full = static_cast<long>(std::floor((end - seg_start) / h));
    for (long i = 0; i <= full; ++i) {
      const double next = i < full ? seg_start + h * static_cast<double>(i + 1) : end;
      if (next <= t) continue;
      rk4_step<double>(rhs, t, y, next - t);
      detail::check_finite(y, next);
      t = next;
      std::vector<double> lam(y.begin() + static_cast<long>(n), y.end());
      check_momentum(lam, t);
      bx.times.push_back(t);
      bx.states.emplace_back(y.begin(), y.begin() + static_cast<long>(n));
      bx.momenta.push_back(std::move(lam));
    }
  }
  return bx;
}

// ---------------------------------------------------------------------------
// Classification

struct NormalLiftOptions {
  double half_width = 2.0;        // grid on [-w, w]^m
  std::size_t target_points = 1000;
  double tolerance = 1e-6;        // max |dH/du| along the reference
};

struct NormalLiftSearch {
  std::size_t points_per_axis = 0;
  std::size_t tried = 0;
  std::size_t satisfying = 0;
  std::optional<std::vector<double>> witness;  // initial lambda^ with p0 = -1
  double best_residual = std::numeric_limits<double>::infinity();
  std::string grid;
};

/// Searches normal lifts (p0 = -1) of the reference: each grid momentum is
/// projected by least squares onto {dH/du = 0 at the initial point}, then
/// integrated along the reference control; it is accepted if stationarity
/// holds within tolerance at every sample. Failure is evidence only.
inline NormalLiftSearch search_normal_lift(const ExtendedSystem& ext, const Trajectory& reference,
                                           const NormalLiftOptions& opt = {}) {
  const HamiltonianModel model(ext);
  const ControlAffineSystem& sys = ext.base();
  const std::size_t m = sys.m();
  const std::size_t k = sys.k();
  NormalLiftSearch out;
  out.points_per_axis = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(std::pow(static_cast<double>(opt.target_points), 1.0 / m))));
  const std::size_t per = out.points_per_axis;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu^%zu uniform points on [-%g, %g]^%zu, p0 = -1, projected onto dH/du = 0",
                per, m, opt.half_width, opt.half_width, m);
  out.grid = buf;

  const Point& x0 = reference.points.front();
  const Control u0 = reference.schedule.at(reference.a);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const auto Xc = sys.input(c).eval<double>(x0);
    for (std::size_t j = 0; j < m; ++j) A(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = Xc[j];
    rhs(static_cast<Eigen::Index>(c)) = ext.cost_du(c, x0, u0);
  }
  const auto cod = A.completeOrthogonalDecomposition();

  auto residual_along = [&](const std::vector<double>& lam0) {
    // Integrates step by step and stops as soon as stationarity fails.
    double worst = 0.0;
    std::vector<double> y{0.0};
    y.insert(y.end(), x0.begin(), x0.end());
    y.insert(y.end(), lam0.begin(), lam0.end());
    const std::size_t n = model.dim();
    auto check = [&](double t) {
      const std::span<const double> ys(y);
      const auto g = model.dH_du(ys.subspan(n, n), ys.subspan(0, n), reference.schedule.at(t));
      for (double v : g) worst = std::max(worst, std::fabs(v));
      return worst <= opt.tolerance;
    };
    if (!check(reference.a)) return worst;
    for (std::size_t i = 1; i < reference.times.size(); ++i) {
      const double t0 = reference.times[i - 1];
      const double t1 = reference.times[i];
      const Control u = reference.schedule.at(0.5 * (t0 + t1));
      auto f = [&](double, const std::vector<double>& yy) { return model.rhs(yy, u); };
      rk4_step<double>(f, t0, y, t1 - t0);
      for (double v : y)
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
      if (!check(t1)) return worst;
    }
    return worst;
  };

  std::vector<std::size_t> idx(m, 0);
  for (bool done = false; !done;) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j)
      p(static_cast<Eigen::Index>(j)) =
          -opt.half_width + 2.0 * opt.half_width * static_cast<double>(idx[j]) / static_cast<double>(per - 1);
    if (k > 0) p -= cod.solve(A * p - rhs);
    std::vector<double> lam0{-1.0};
    for (std::size_t j = 0; j < m; ++j) lam0.push_back(p(static_cast<Eigen::Index>(j)));
    const double r = residual_along(lam0);
    ++out.tried;
    if (r < out.best_residual) out.best_residual = r;
    if (r <= opt.tolerance) {
      ++out.satisfying;
      if (!out.witness) out.witness = lam0;
    }
    done = true;
    for (std::size_t j = m; j-- > 0;) {
      if (++idx[j] < per) {
        done = false;
        break;
      }
      idx[j] = 0;
    }
  }
  return out;
}

enum class ExtremalKind { Normal, Abnormal };

struct Classification {
  ExtremalKind kind = ExtremalKind::Normal;
  double lambda0 = 0.0;
  std::string verdict;
  bool inconclusive = false;
  std::optional<NormalLiftSearch> search;
};

/// Normal when p0 < 0, abnormal when |p0| <= 1e-12. For abnormal extremals a
/// normal-lift search result may be attached; a failed search is reported as
/// inconclusive evidence of strict abnormality.
inline Classification classify_extremal(const Biextremal& bx, std::optional<NormalLiftSearch> search = {}) {
  const auto l0 = bx.lambda0();
  if (!l0) throw InvalidArgument("classification needs an extended-mode biextremal");
  for (const auto& lam : bx.momenta)
    if (lam[0] != *l0) throw InvariantViolation("cost multiplier p0 is not constant along the biextremal");
  if (*l0 > 1e-12) throw InvariantViolation("cost multiplier p0 must be nonpositive");
  Classification c;
  c.lambda0 = *l0;
  if (*l0 < -1e-12) {
    c.kind = ExtremalKind::Normal;
    c.verdict = "normal";
    return c;
  }
  c.kind = ExtremalKind::Abnormal;
  if (!search) {
    c.verdict = "abnormal";
  } else if (search->satisfying > 0) {
    c.verdict = "abnormal; normal lift found (not strictly abnormal)";
  } else {
    c.verdict = "abnormal; normal lift not found (inconclusive)";
    c.inconclusive = true;
  }
  c.search = std::move(search);
  return c;
}

// ---------------------------------------------------------------------------
// Audit

struct AuditCondition {
  std::string id;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct AuditOptions {
  double stationarity_tol = 1e-8;
  double momentum_floor = 1e-12;
  /// Optional stronger check: H(lambda, x, w) <= H(lambda, x, u) + tol for w
  /// on this grid (per component, restricted to the open box).
  std::optional<std::vector<double>> max_check_grid;
};

struct AuditReport {
  std::vector<AuditCondition> conditions;  // the five necessary conditions
  std::optional<AuditCondition> grid_maximization;
  double h_min = 0.0;
  double h_max = 0.0;

  bool all_pass() const {
    for (const auto& c : conditions)
      if (!c.pass) return false;
    return !grid_maximization || grid_maximization->pass;
  }
};

/// Checks the five conditions on the samples of bx:
/// (i) H constant, (ii) dH/du = 0, (iii) lambda(t) supports the cone at its
/// time, (iv) lambda never vanishes, (v) p0 constant and nonpositive.
inline AuditReport audit_necessary_conditions(const HamiltonianModel& model, const Biextremal& bx, const Cone& cone,
                                              double cone_time, const AuditOptions& opt = {}) {
  if (bx.times.empty()) throw InvalidArgument("empty biextremal");
  if (bx.mode != model.mode()) throw InvalidArgument("biextremal and model use different modes");
  AuditReport rep;
  char buf[256];

  const auto H_at = [&](std::size_t i) {
    return model.hamiltonian(bx.momenta[i], bx.states[i], bx.schedule.at(bx.times[i]));
  };
  const double H0 = H_at(0);
  rep.h_min = rep.h_max = H0;
  double drift = 0.0;
  double stat = 0.0;
  double min_norm = std::numeric_limits<double>::infinity();
  double worst_stat_t = bx.times.front();
  for (std::size_t i = 0; i < bx.times.size(); ++i) {
    const double H = H_at(i);
    rep.h_min = std::min(rep.h_min, H);
    rep.h_max = std::max(rep.h_max, H);
    drift = std::max(drift, std::fabs(H - H0));
    for (double g : model.dH_du(bx.momenta[i], bx.states[i], bx.schedule.at(bx.times[i])))
      if (std::fabs(g) > stat) {
        stat = std::fabs(g);
        worst_stat_t = bx.times[i];
      }
    min_norm = std::min(min_norm, norm(bx.momenta[i]));
  }

  const double tol_H = 1e-8 * (1.0 + std::fabs(H0));
  std::snprintf(buf, sizeof buf, "H in [%.6g, %.6g] over %zu samples", rep.h_min, rep.h_max, bx.times.size());
  rep.conditions.push_back({"i", "Hamiltonian constant", drift <= tol_H, drift, tol_H, buf});

  std::snprintf(buf, sizeof buf, "largest |dH/du| at t=%.6g", worst_stat_t);
  rep.conditions.push_back(
      {"ii", "Hamiltonian stationary in u", stat <= opt.stationarity_tol, stat, opt.stationarity_tol, buf});

  {
    AuditCondition c{"iii", "covector supports the perturbation cone", false, 0.0, 0.0, ""};
    const auto idx = bx.sample_at(cone_time, 1e-9);
    if (!idx) {
      std::snprintf(buf, sizeof buf, "no biextremal sample at cone time %.6g", cone_time);
      c.detail = buf;
    } else {
      std::vector<double> lam = bx.momenta[*idx];
      if (lam.size() == cone.dim() + 1) lam.erase(lam.begin());
      const SupportCheck sc = is_supporting(Covector{cone.base(), lam}, cone);
      c.pass = sc.supporting;
      c.value = sc.max_pairing;
      c.tolerance = 1e-9 * cone.max_generator_norm() * norm(lam);
      std::snprintf(buf, sizeof buf, "max pairing over %zu generators at t=%.6g%s", cone.size(), cone_time,
                    sc.zero_covector ? " (zero covector rejected)" : "");
      c.detail = buf;
    }
    rep.conditions.push_back(std::move(c));
  }

  std::snprintf(buf, sizeof buf, "smallest |lambda| over samples");
  rep.conditions.push_back(
      {"iv", "momentum nonvanishing", min_norm >= opt.momentum_floor, min_norm, opt.momentum_floor, buf});

  {
    AuditCondition c{"v", "cost multiplier constant and nonpositive", true, 0.0, 0.0, ""};
    if (const auto l0 = bx.lambda0()) {
      double spread = 0.0;
      for (const auto& lam : bx.momenta) spread = std::max(spread, std::fabs(lam[0] - *l0));
      c.pass = spread == 0.0 && *l0 <= 0.0;
      c.value = *l0;
      std::snprintf(buf, sizeof buf, "p0 = %.17g, spread %.3g", *l0, spread);
      c.detail = buf;
    } else {
      c.detail = "reduced mode: p0 = 0 by construction";
    }
    rep.conditions.push_back(std::move(c));
  }

  if (opt.max_check_grid) {
    const auto& sys = model.base();
    std::vector<std::vector<double>> axis(sys.k());
    for (std::size_t c = 0; c < sys.k(); ++c)
      for (double g : *opt.max_check_grid)
        if (sys.control_box()[c].lower < g && g < sys.control_box()[c].upper) axis[c].push_back(g);
    double excess = 0.0;
    bool any = sys.k() > 0 && std::all_of(axis.begin(), axis.end(), [](const auto& a) { return !a.empty(); });
    if (any) {
      for (std::size_t i = 0; i < bx.times.size(); ++i) {
        const double H = H_at(i);
        std::vector<std::size_t> idx(sys.k(), 0);
        for (bool done = false; !done;) {
          Control w(sys.k());
          for (std::size_t c = 0; c < sys.k(); ++c) w[c] = axis[c][idx[c]];
          excess = std::max(excess, model.hamiltonian(bx.momenta[i], bx.states[i], w) - H);
          done = true;
          for (std::size_t c = sys.k(); c-- > 0;) {
            if (++idx[c] < axis[c].size()) {
              done = false;
              break;
            }
            idx[c] = 0;
          }
        }
      }
    }
    const double tol = 1e-8 * (1.0 + std::fabs(H0));
    rep.grid_maximization =
        AuditCondition{"max", "Hamiltonian maximal over the control grid", excess <= tol, excess, tol,
                       any ? "largest excess of H(w) over H(u)" : "grid has no admissible values"};
  }
  return rep;
}

}  // namespace geocon
