#pragma once

// End-time variation curves
//   nu(s) = Phi^{xi0}_{q2(s)} o Phi^{xi_r}_{tau_r(s)} o ... o Phi^{xi_1}_{tau_1(s)} o Phi^{xi0}_{q1(s)} (x),
// their jets at s = 0, order detection, and the two template families
// (needle and commutator variations).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geocon/dual.hpp"
#include "geocon/errors.hpp"
#include "geocon/expr.hpp"
#include "geocon/fields.hpp"
#include "geocon/system.hpp"

namespace geocon {

/// Ratio between the second jet of the commutator curve
/// (xi0, Z, -xi0, -Z applied in that order, each for time s) and [xi0, Z].
/// Fixed by the oracle in tests/test_variations.cpp.
inline constexpr double kBracketJetFactor = 2.0;

inline constexpr int kMaxJetOrder = 4;

/// Default tolerances for jets and order detection.
struct JetOptions {
  int l_max = kMaxJetOrder;
  double s0 = 0.05;           // largest finite-difference step
  int levels = 4;             // Richardson levels on the grid s0 * 2^-j
  double step = kDefaultStep; // integrator step for flows
  double agreement = 1e-3;    // estimator agreement, relative with unit floor
  double order_eps = 1e-6;    // nonzero-jet threshold, times (1 + |x|)
};

/// tau2(s) = (q1(s), q2(s), tau(s)), all expressions in the variable s.
class EndTimeVariation {
 public:
  EndTimeVariation() = default;
  EndTimeVariation(Expr q1, Expr q2, std::vector<Expr> tau, double s_max = 1.0)
      : q1_(std::move(q1)), q2_(std::move(q2)), tau_(std::move(tau)) {
    validate(s_max);
  }

  static const std::vector<std::string>& variables() {
    static const std::vector<std::string> vars{"s"};
    return vars;
  }

  static EndTimeVariation parse(const std::string& q1, const std::string& q2, const std::vector<std::string>& tau,
                                double s_max = 1.0) {
    std::vector<Expr> t;
    for (const auto& src : tau) t.push_back(parse_expression(src, variables()));
    return EndTimeVariation(parse_expression(q1, variables()), parse_expression(q2, variables()), std::move(t),
                            s_max);
  }

  std::size_t r() const { return tau_.size(); }
  const Expr& q1() const { return q1_; }
  const Expr& q2() const { return q2_; }
  const std::vector<Expr>& tau() const { return tau_; }

  std::string describe() const {
    std::string out = "q1=" + q1_.to_string() + "; q2=" + q2_.to_string() + "; tau=(";
    for (std::size_t i = 0; i < tau_.size(); ++i) out += (i ? ", " : "") + tau_[i].to_string();
    return out + ")";
  }

 private:
  void validate(double s_max) const {
    auto at = [](const Expr& e, double s) { return evaluate<double>(e, std::vector<double>{s}); };
    if (std::fabs(at(q1_, 0.0)) > 1e-12 || std::fabs(at(q2_, 0.0)) > 1e-12)
      throw InvalidArgument("end-time variation: q1(0) and q2(0) must vanish");
    for (const auto& t : tau_) {
      if (std::fabs(at(t, 0.0)) > 1e-12) throw InvalidArgument("end-time variation: tau(0) must vanish");
      for (int i = 1; i <= 64; ++i)
        if (at(t, s_max * i / 64.0) < 0.0)
          throw InvalidArgument("end-time variation: tau must be nonnegative");
    }
  }

  Expr q1_;
  Expr q2_;
  std::vector<Expr> tau_;
};

struct VariationRecipe {
  VectorField xi0;
  std::vector<VectorField> seq;
  EndTimeVariation tau2;
  std::string label;
};

/// The variation curve at parameter s. q1 flow first, then the sequence in
/// order, then the q2 flow.
template <class S>
std::vector<S> variation_curve(const VariationRecipe& recipe, const Point& x, const S& s,
                               double h = kDefaultStep) {
  if (recipe.seq.size() != recipe.tau2.r())
    throw DimensionError("variation: sequence length differs from the number of end-time components");
  const std::vector<S> env{s};
  std::vector<S> y(x.begin(), x.end());
  y = flow<S>(recipe.xi0, evaluate<S>(recipe.tau2.q1(), env), std::move(y), h);
  for (std::size_t i = 0; i < recipe.seq.size(); ++i)
    y = flow<S>(recipe.seq[i], evaluate<S>(recipe.tau2.tau()[i], env), std::move(y), h);
  return flow<S>(recipe.xi0, evaluate<S>(recipe.tau2.q2(), env), std::move(y), h);
}

inline Point variation_curve(const VectorField& xi0, const std::vector<VectorField>& seq,
                             const EndTimeVariation& tau2, const Point& x, double s, double h = kDefaultStep) {
  return variation_curve<double>(VariationRecipe{xi0, seq, tau2, ""}, x, s, h);
}

using Jets = std::vector<std::vector<double>>;  // Jets[l - 1] is the l-th jet

/// One-sided derivative estimates d^l nu / ds^l (0), l = 1..l_max, from
/// forward differences on the grid s0 * 2^-j, Richardson-extrapolated.
inline Jets estimate_jets(const std::function<Point(double)>& curve, int l_max, double s0, int levels = 4) {
  if (l_max < 1 || l_max > kMaxJetOrder) throw InvalidArgument("jet order must lie in 1..4");
  if (!(s0 > 0.0) || levels < 1) throw InvalidArgument("jet grid must have s0 > 0 and at least one level");
  const Point origin = curve(0.0);
  const std::size_t m = origin.size();
  Jets jets;
  for (int l = 1; l <= l_max; ++l) {
    std::vector<std::vector<std::vector<double>>> table(static_cast<std::size_t>(levels));
    for (int j = 0; j < levels; ++j) {
      const double hs = s0 / std::pow(2.0, j);
      std::vector<double> diff(m, 0.0);
      double binom = 1.0;  // C(l, k)
      for (int k = 0; k <= l; ++k) {
        const Point p = k == 0 ? origin : curve(hs * k);
        const double w = (((l - k) % 2) ? -1.0 : 1.0) * binom;
        for (std::size_t i = 0; i < m; ++i) diff[i] += w * p[i];
        binom = binom * (l - k) / (k + 1);
      }
      for (auto& d : diff) d /= std::pow(hs, l);
      auto& row = table[static_cast<std::size_t>(j)];
      row.push_back(diff);
      for (int p = 1; p <= j; ++p) {
        const double f = std::pow(2.0, p);
        std::vector<double> r(m);
        const auto& prev = table[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(p - 1)];
        for (std::size_t i = 0; i < m; ++i) r[i] = (f * row[static_cast<std::size_t>(p - 1)][i] - prev[i]) / (f - 1.0);
        row.push_back(r);
      }
    }
    jets.push_back(table.back().back());
  }
  return jets;
}

namespace detail {

template <int N>
Jets recipe_jets_ad(const VariationRecipe& recipe, const Point& x, double h) {
  using S = NestedDual<N>;
  const std::vector<S> y = variation_curve<S>(recipe, x, taylor_seed<N>(0.0), h);
  Jets jets(N, std::vector<double>(y.size()));
  for (int l = 1; l <= N; ++l)
    for (std::size_t i = 0; i < y.size(); ++i) jets[static_cast<std::size_t>(l - 1)][i] = taylor_coefficient(y[i], l);
  return jets;
}

}  // namespace detail

/// Exact jets of the numerical curve at s = 0 from derivative-carrying
/// scalars run through the integrator. At s = 0 every flow is a single RK4
/// step whose Taylor expansion matches the exact flow through order 4.
inline Jets recipe_jets_forward_mode(const VariationRecipe& recipe, const Point& x, int l_max,
                                     double h = kDefaultStep) {
  switch (l_max) {
    case 1: return detail::recipe_jets_ad<1>(recipe, x, h);
    case 2: return detail::recipe_jets_ad<2>(recipe, x, h);
    case 3: return detail::recipe_jets_ad<3>(recipe, x, h);
    case 4: return detail::recipe_jets_ad<4>(recipe, x, h);
    default: throw InvalidArgument("jet order must lie in 1..4");
  }
}

struct RecipeJets {
  Jets finite_difference;
  Jets forward_mode;
};

inline bool jets_agree(const std::vector<double>& fd, const std::vector<double>& ad, double tol) {
  std::vector<double> diff(fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = fd[i] - ad[i];
  return norm_inf(diff) <= tol * std::max(1.0, norm_inf(ad));
}

/// Both estimators for a flow-built curve; throws NumericalFragilityError if
/// they disagree at any order up to l_max.
inline RecipeJets estimate_jets(const VariationRecipe& recipe, const Point& x, const JetOptions& opt = {}) {
  RecipeJets out;
  out.forward_mode = recipe_jets_forward_mode(recipe, x, opt.l_max, opt.step);
  out.finite_difference = estimate_jets(
      [&](double s) { return variation_curve<double>(recipe, x, s, opt.step); }, opt.l_max, opt.s0, opt.levels);
  for (int l = 1; l <= opt.l_max; ++l)
    if (!jets_agree(out.finite_difference[static_cast<std::size_t>(l - 1)],
                    out.forward_mode[static_cast<std::size_t>(l - 1)], opt.agreement))
      throw NumericalFragilityError("jet estimators disagree at order " + std::to_string(l) + " for " +
                                    (recipe.label.empty() ? std::string("variation") : recipe.label));
  return out;
}

struct PerturbationVector {
  Point base;
  double time = 0.0;
  int order = 1;
  TangentVector vector;
  VariationRecipe recipe;
  std::string kind;  // "needle", "bracket" or "custom"
};

struct OrderResult {
  std::optional<int> order;  // empty: no nonzero jet up to l_max (order "infinity")
  std::optional<PerturbationVector> perturbation;
  RecipeJets jets;
};

inline double order_threshold(const Point& x, const JetOptions& opt) { return opt.order_eps * (1.0 + norm(x)); }

/// Smallest l <= l_max whose jet is nonzero under both estimators; that jet
/// (forward-mode value) is the perturbation vector.
inline OrderResult order_and_vector(const VariationRecipe& recipe, const Point& x, const JetOptions& opt = {},
                                    double time = 0.0) {
  OrderResult out;
  out.jets.forward_mode = recipe_jets_forward_mode(recipe, x, opt.l_max, opt.step);
  const double eps = order_threshold(x, opt);
  const auto curve = [&](double s) { return variation_curve<double>(recipe, x, s, opt.step); };
  for (int l = 1; l <= opt.l_max; ++l) {
    // Finite differences are recomputed per order so that higher orders are
    // only estimated when the lower ones vanish.
    out.jets.finite_difference = estimate_jets(curve, l, opt.s0, opt.levels);
    const auto& fd = out.jets.finite_difference.back();
    const auto& ad = out.jets.forward_mode[static_cast<std::size_t>(l - 1)];
    if (!jets_agree(fd, ad, opt.agreement))
      throw NumericalFragilityError("jet estimators disagree at order " + std::to_string(l) + " for " +
                                    (recipe.label.empty() ? std::string("variation") : recipe.label));
    if (norm(fd) > eps && norm(ad) > eps) {
      out.order = l;
      out.perturbation = PerturbationVector{x, time, l, TangentVector{x, ad}, recipe, "custom"};
      return out;
    }
  }
  return out;
}

/// Needle recipe: xi = (xi_{u1}), tau = l1 s, q1 = -l1 s, q2 = 0 around xi_{u_ref}.
inline VariationRecipe needle_recipe(const ControlAffineSystem& sys, const Control& u_ref, const Control& u1,
                                     double l1) {
  const Expr s = Expr::variable(0, "s");
  EndTimeVariation tau2(Expr::constant(-l1) * s, Expr::constant(0.0), {Expr::constant(l1) * s});
  return {sys.slice(u_ref), {sys.slice(u1)}, std::move(tau2), "needle"};
}

/// Order-one needle perturbation sum_c l1 (u1^c - u_ref^c) X_c(x); empty when
/// that vector vanishes. The recipe's estimated first jet must reproduce it.
inline std::optional<PerturbationVector> needle_variation(const ControlAffineSystem& sys, const Control& u_ref,
                                                          const Control& u1, double l1, const Point& x,
                                                          const JetOptions& opt = {}, double time = 0.0) {
  if (!(l1 > 0.0)) throw InvalidArgument("needle length l1 must be positive");
  if (!sys.admissible(u_ref) || !sys.admissible(u1)) throw InvalidArgument("needle controls must lie in U");
  std::vector<double> closed(sys.m(), 0.0);
  for (std::size_t c = 0; c < sys.k(); ++c) {
    const double w = l1 * (u1[c] - u_ref[c]);
    if (w == 0.0) continue;
    const auto Xc = sys.input(c).eval<double>(x);
    for (std::size_t i = 0; i < closed.size(); ++i) closed[i] += w * Xc[i];
  }
  if (norm(closed) <= order_threshold(x, opt)) return std::nullopt;

  VariationRecipe recipe = needle_recipe(sys, u_ref, u1, l1);
  JetOptions first = opt;
  first.l_max = 1;
  const RecipeJets jets = estimate_jets(recipe, x, first);
  std::vector<double> diff(closed.size());
  for (std::size_t i = 0; i < closed.size(); ++i) diff[i] = jets.forward_mode[0][i] - closed[i];
  if (norm_inf(diff) > 1e-6 * std::max(1.0, norm_inf(closed)))
    throw InternalConsistencyError("needle variation: estimated first jet does not match the closed form");
  return PerturbationVector{x, time, 1, TangentVector{x, closed}, std::move(recipe), "needle"};
}

/// Commutator recipe: xi0, Z, -xi0, -Z each flowed for time s, xi0 first.
inline VariationRecipe commutator_recipe(const VectorField& xi0, const VectorField& zj) {
  const Expr s = Expr::variable(0, "s");
  EndTimeVariation tau2(Expr::constant(0.0), Expr::constant(0.0), {s, s, s, s});
  return {xi0, {xi0, zj, -xi0, -zj}, std::move(tau2), "commutator"};
}

/// Order-two perturbation kBracketJetFactor * [xi0, zj](x); empty when the
/// bracket vanishes at x.
inline std::optional<PerturbationVector> bracket_variation(const VectorField& xi0, const VectorField& zj,
                                                           const Point& x, const JetOptions& opt = {},
                                                           double time = 0.0) {
  const auto bracket = lie_bracket(xi0, zj).eval<double>(x);
  const double eps = order_threshold(x, opt);
  if (norm(bracket) <= eps) return std::nullopt;
  JetOptions second = opt;
  second.l_max = 2;
  VariationRecipe recipe = commutator_recipe(xi0, zj);
  OrderResult res = order_and_vector(recipe, x, second, time);
  std::vector<double> expected(bracket.size());
  for (std::size_t i = 0; i < bracket.size(); ++i) expected[i] = kBracketJetFactor * bracket[i];
  auto describe = [](const std::vector<double>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s + ")";
  };
  if (!res.order || *res.order != 2)
    throw ConventionError("commutator variation did not have order 2; expected " + describe(expected));
  const auto& got = res.perturbation->vector.components;
  std::vector<double> diff(got.size());
  for (std::size_t i = 0; i < got.size(); ++i) diff[i] = got[i] - expected[i];
  if (norm(diff) > 1e-4 * norm(expected))
    throw ConventionError("commutator jet " + describe(got) + " is not aligned with the bracket " +
                          describe(expected));
  PerturbationVector pv = *res.perturbation;
  pv.kind = "bracket";
  return pv;
}

/// Removes zero vectors and positive multiples of earlier vectors.
inline std::vector<PerturbationVector> deduplicate_directions(std::vector<PerturbationVector> in,
                                                              double cos_tol = 1e-12) {
  std::vector<PerturbationVector> out;
  for (auto& pv : in) {
    const auto& v = pv.vector.components;
    const double nv = norm(v);
    if (nv == 0.0) continue;
    bool dup = false;
    for (const auto& q : out) {
      const auto& w = q.vector.components;
      if (dot(v, w) / (nv * norm(w)) >= 1.0 - cos_tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(std::move(pv));
  }
  return out;
}

struct SamplingOptions {
  int max_order = 2;
  std::size_t budget = 64;
  std::vector<double> control_grid{-1.0, 0.0, 1.0};
  JetOptions jets;
};

/// Finite sample of perturbation vectors at gamma(t0): order-one needles over
/// the control grid (values strictly inside U), then order-two commutators of
/// each input field against xi0 = xi_{u(t0)}. Parallel duplicates removed.
inline std::vector<PerturbationVector> sample_perturbation_set(const ControlAffineSystem& sys,
                                                               const Trajectory& reference, double t0,
                                                               const SamplingOptions& opt = {}) {
  if (t0 < reference.a || t0 > reference.b) throw InvalidArgument("sample time outside the reference interval");
  if (reference.schedule.is_breakpoint(t0)) throw InvalidArgument("sample time coincides with a control breakpoint");
  if (opt.max_order < 1 || opt.max_order > 2) throw InvalidArgument("max_order must be 1 or 2");
  const Point x = state_at(sys, reference, t0);
  const Control u_ref = reference.schedule.at(t0);
  std::vector<PerturbationVector> found;
  const std::size_t k = sys.k();

  if (k > 0 && sys.admissible(u_ref)) {
    std::vector<std::vector<double>> axis(k);
    for (std::size_t c = 0; c < k; ++c)
      for (double g : opt.control_grid)
        if (sys.control_box()[c].lower < g && g < sys.control_box()[c].upper) axis[c].push_back(g);
    if (std::all_of(axis.begin(), axis.end(), [](const auto& a) { return !a.empty(); })) {
      std::vector<std::size_t> idx(k, 0);
      for (;;) {
        Control u1(k);
        for (std::size_t c = 0; c < k; ++c) u1[c] = axis[c][idx[c]];
        if (auto pv = needle_variation(sys, u_ref, u1, 1.0, x, opt.jets, t0)) found.push_back(std::move(*pv));
        bool done = true;
        for (std::size_t c = k; c-- > 0;) {
          if (++idx[c] < axis[c].size()) {
            done = false;
            break;
          }
          idx[c] = 0;
        }
        if (done) break;
      }
    }
  }

  if (opt.max_order >= 2) {
    const VectorField xi0 = sys.slice(u_ref);
    for (std::size_t c = 0; c < k; ++c)
      if (auto pv = bracket_variation(xi0, sys.input(c), x, opt.jets, t0)) found.push_back(std::move(*pv));
  }

  found = deduplicate_directions(std::move(found));
  if (found.size() > opt.budget) found.resize(opt.budget);
  return found;
}

}  // namespace geocon
