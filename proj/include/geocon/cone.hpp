#pragma once

// Finite-generator inner approximations of the perturbation cone K_t and
// supporting-hyperplane queries. Support over the generators equals support
// over their closed convex conic hull, so no hull is ever formed.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geocon/errors.hpp"
#include "geocon/fields.hpp"
#include "geocon/lp.hpp"
#include "geocon/system.hpp"
#include "geocon/variations.hpp"

namespace geocon {

struct GeneratorProvenance {
  double t0 = 0.0;
  int order = 1;
  std::string recipe;
};

class Cone {
 public:
  Cone() = default;
  explicit Cone(Point base) : base_(std::move(base)) {}

  /// Adds v unless it is zero or a positive multiple of an existing generator.
  bool add(std::vector<double> v, GeneratorProvenance prov = {}) {
    if (v.size() != base_.size()) throw DimensionError("cone generator has wrong dimension");
    const double nv = norm(v);
    if (nv == 0.0) return false;
    for (const auto& w : gens_)
      if (dot(v, w) / (nv * norm(w)) >= 1.0 - 1e-12) return false;
    gens_.push_back(std::move(v));
    prov_.push_back(std::move(prov));
    return true;
  }

  const Point& base() const { return base_; }
  std::size_t dim() const { return base_.size(); }
  bool empty() const { return gens_.empty(); }
  std::size_t size() const { return gens_.size(); }
  const std::vector<std::vector<double>>& generators() const { return gens_; }
  const std::vector<GeneratorProvenance>& provenance() const { return prov_; }

  double max_generator_norm() const {
    double m = 0.0;
    for (const auto& g : gens_) m = std::max(m, norm(g));
    return m;
  }

 private:
  Point base_;
  std::vector<std::vector<double>> gens_;
  std::vector<GeneratorProvenance> prov_;
};

struct SupportReport {
  std::optional<Covector> covector;
  double max_pairing = 0.0;
  std::optional<double> separating_margin;  // only with a decrease direction
  bool feasible = false;
};

/// Cone at gamma(t): perturbation samples at each t0 transported to gamma(t)
/// along the reference, merged and deduplicated.
inline Cone assemble_cone(const ControlAffineSystem& sys, const Trajectory& reference, double t,
                          const std::vector<double>& sample_times, const SamplingOptions& opt = {}) {
  if (t < reference.a || t > reference.b) throw InvalidArgument("cone time outside the reference interval");
  Cone cone(state_at(sys, reference, t));
  for (double t0 : sample_times) {
    if (!(t0 > reference.a && t0 <= t)) throw InvalidArgument("cone sample times must lie in (a, t]");
    for (const auto& pv : sample_perturbation_set(sys, reference, t0, opt)) {
      TangentVector moved = t0 == t ? pv.vector : transport_along_reference(sys, reference, t0, t, pv.vector);
      cone.add(std::move(moved.components), {t0, pv.order, pv.kind});
    }
  }
  return cone;
}

namespace detail {

/// Box-constrained dual-cone LP in split variables lambda = lp - lm with
/// lp, lm in [0, 1]; optional extra variable mu bounded by <lambda, d>.
struct SupportLp {
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::size_t m = 0;
  bool with_mu = false;

  SupportLp(const Cone& cone, const std::vector<double>* d) : m(cone.dim()), with_mu(d != nullptr) {
    const std::size_t n = 2 * m + (with_mu ? 1 : 0);
    for (const auto& g : cone.generators()) {
      const double s = norm(g);
      std::vector<double> row(n, 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        row[j] = g[j] / s;
        row[m + j] = -g[j] / s;
      }
      A.push_back(std::move(row));
      b.push_back(0.0);
    }
    for (std::size_t j = 0; j < 2 * m; ++j) {
      std::vector<double> row(n, 0.0);
      row[j] = 1.0;
      A.push_back(std::move(row));
      b.push_back(1.0);
    }
    if (with_mu) {
      std::vector<double> row(n, 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        row[j] = -(*d)[j];
        row[m + j] = (*d)[j];
      }
      row[2 * m] = 1.0;
      A.push_back(std::move(row));
      b.push_back(0.0);
    }
  }

  std::vector<double> lambda(const lp::Result& r) const {
    std::vector<double> l(m);
    for (std::size_t j = 0; j < m; ++j) l[j] = r.x[j] - r.x[m + j];
    return l;
  }
};

inline double max_pairing(const Cone& cone, const std::vector<double>& lambda) {
  double mp = cone.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& g : cone.generators()) mp = std::max(mp, dot(lambda, g));
  return mp;
}

inline void normalize_inf(std::vector<double>& v) {
  const double s = norm_inf(v);
  for (auto& x : v) x /= s;
}

}  // namespace detail

/// Finds lambda != 0 with <lambda, v_i> <= 0 for all generators, normalized to
/// |lambda|_inf = 1. With a decrease direction d the margin <lambda, d> is
/// maximized first. Otherwise candidates are tried in the order +e_{m-1},
/// -e_{m-1}, +e_{m-2}, ... and the first positive optimum wins.
inline SupportReport find_supporting_covector(const Cone& cone,
                                              const std::optional<std::vector<double>>& decrease_direction = {}) {
  constexpr double kPositive = 1e-9;
  SupportReport rep;
  const std::size_t m = cone.dim();

  auto accept = [&](std::vector<double> lambda) {
    detail::normalize_inf(lambda);
    rep.max_pairing = detail::max_pairing(cone, lambda);
    if (decrease_direction) rep.separating_margin = dot(lambda, *decrease_direction);
    rep.covector = Covector{cone.base(), std::move(lambda)};
    rep.feasible = true;
    return rep;
  };

  if (decrease_direction) {
    if (decrease_direction->size() != m) throw DimensionError("decrease direction has wrong dimension");
    detail::SupportLp prob(cone, &*decrease_direction);
    std::vector<double> c(2 * m + 1, 0.0);
    c[2 * m] = 1.0;
    const lp::Result r = lp::maximize(c, prob.A, prob.b);
    if (r.status == lp::Status::Optimal && r.value > kPositive) return accept(prob.lambda(r));
  }

  detail::SupportLp prob(cone, nullptr);
  for (std::size_t jj = m; jj-- > 0;) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> c(2 * m, 0.0);
      c[jj] = sign;
      c[m + jj] = -sign;
      const lp::Result r = lp::maximize(c, prob.A, prob.b);
      if (r.status == lp::Status::Optimal && r.value > kPositive) return accept(prob.lambda(r));
    }
  }
  rep.feasible = false;
  rep.max_pairing = 0.0;
  if (decrease_direction) rep.separating_margin = 0.0;
  return rep;
}

struct SupportCheck {
  bool supporting = false;
  double max_pairing = 0.0;
  bool zero_covector = false;  // rejected: the covector must not vanish
};

/// max_i <lambda, v_i> <= 1e-9 * max_i |v_i| * |lambda|.
inline SupportCheck is_supporting(const Covector& lambda, const Cone& cone) {
  if (lambda.components.size() != cone.dim()) throw DimensionError("covector has wrong dimension for the cone");
  SupportCheck out;
  const double nl = norm(lambda.components);
  if (nl == 0.0) {
    out.zero_covector = true;
    return out;
  }
  out.max_pairing = detail::max_pairing(cone, lambda.components);
  out.supporting = out.max_pairing <= 1e-9 * cone.max_generator_norm() * nl;
  return out;
}

/// Membership of w in the closed convex cone spanned by the generators: no
/// covector in the dual cone pairs positively with w.
inline bool cone_contains(const Cone& cone, const std::vector<double>& w) {
  if (norm(w) == 0.0) return true;
  std::vector<double> d = w;
  const double s = norm(d);
  for (auto& x : d) x /= s;
  detail::SupportLp prob(cone, &d);
  const std::size_t m = cone.dim();
  std::vector<double> c(2 * m + 1, 0.0);
  c[2 * m] = 1.0;
  const lp::Result r = lp::maximize(c, prob.A, prob.b);
  return r.status == lp::Status::Optimal && r.value <= 1e-9;
}

}  // namespace geocon
