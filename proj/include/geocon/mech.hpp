#pragma once

// Affine-connection control systems on TQ with chart (x, v): geodesic spray
// from Christoffel symbols, vertical lifts, and the first two generator
// families with their jet identities.

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "geocon/errors.hpp"
#include "geocon/expr.hpp"
#include "geocon/fields.hpp"
#include "geocon/pca.hpp"
#include "geocon/system.hpp"
#include "geocon/variations.hpp"

namespace geocon {

struct ConnectionSpec {
  std::vector<std::string> config_names;
  std::vector<std::string> velocity_names;
  /// christoffel[i][j][k] = Gamma^i_{jk}, expressions in the configuration
  /// variables only.
  std::vector<std::vector<std::vector<Expr>>> christoffel;

  std::size_t n() const { return config_names.size(); }

  std::vector<std::string> chart() const {
    std::vector<std::string> out = config_names;
    out.insert(out.end(), velocity_names.begin(), velocity_names.end());
    return out;
  }

  static ConnectionSpec flat(std::vector<std::string> config, std::vector<std::string> velocity) {
    ConnectionSpec c{std::move(config), std::move(velocity), {}};
    const std::size_t n = c.n();
    c.christoffel.assign(n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n, Expr::constant(0.0))));
    c.validate();
    return c;
  }

  static ConnectionSpec parse(std::vector<std::string> config, std::vector<std::string> velocity,
                              const std::vector<std::vector<std::vector<std::string>>>& gamma) {
    ConnectionSpec c{std::move(config), std::move(velocity), {}};
    for (const auto& plane : gamma) {
      std::vector<std::vector<Expr>> p;
      for (const auto& row : plane) {
        std::vector<Expr> r;
        for (const auto& src : row) r.push_back(parse_expression(src, c.config_names));
        p.push_back(std::move(r));
      }
      c.christoffel.push_back(std::move(p));
    }
    c.validate();
    return c;
  }

  /// Throws unless the array is n x n x n and symmetric in the lower indices,
  /// symbolically or at 10 random points of [0.5, 1.5]^n within 1e-10.
  void validate() const {
    const std::size_t n = this->n();
    if (velocity_names.size() != n) throw DimensionError("velocity chart must match the configuration chart");
    if (christoffel.size() != n) throw DimensionError("Christoffel array must be n x n x n");
    for (const auto& plane : christoffel) {
      if (plane.size() != n) throw DimensionError("Christoffel array must be n x n x n");
      for (const auto& row : plane)
        if (row.size() != n) throw DimensionError("Christoffel array must be n x n x n");
    }
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    std::vector<std::vector<double>> pts(10, std::vector<double>(n));
    for (auto& p : pts)
      for (auto& v : p) v = dist(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          const Expr& a = christoffel[i][j][k];
          const Expr& b = christoffel[i][k][j];
          if (fold(a - b).is_zero()) continue;
          for (const auto& p : pts)
            if (std::fabs(evaluate<double>(a, p) - evaluate<double>(b, p)) > 1e-10)
              throw InvalidArgument("Christoffel symbols are not symmetric in the lower indices (i=" +
                                    std::to_string(i + 1) + ", j=" + std::to_string(j + 1) +
                                    ", k=" + std::to_string(k + 1) + ")");
        }
  }
};

/// Z = v^i d/dx^i - Gamma^i_{jk} v^j v^k d/dv^i on the 2n chart (x, v).
inline VectorField spray_from_christoffel(const ConnectionSpec& conn) {
  const std::size_t n = conn.n();
  std::vector<Expr> comps;
  auto v = [&](std::size_t j) { return Expr::variable(static_cast<int>(n + j), conn.velocity_names[j]); };
  for (std::size_t i = 0; i < n; ++i) comps.push_back(v(i));
  for (std::size_t i = 0; i < n; ++i) {
    Expr acc = Expr::constant(0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const Expr& g = conn.christoffel[i][j][k];
        const Expr& h = conn.christoffel[i][k][j];
        if (k == j || g == h) {
          if (fold(g).is_zero()) continue;
          const Expr coeff = k == j ? g : Expr::constant(2.0) * g;
          acc = acc - coeff * v(j) * v(k);
        } else {
          if (!fold(g).is_zero()) acc = acc - g * v(j) * v(k);
          if (!fold(h).is_zero()) acc = acc - h * v(k) * v(j);
        }
      }
    comps.push_back(fold(acc));
  }
  return VectorField(std::move(comps));
}

/// Y^V = (0, ..., 0, y^1(x), ..., y^n(x)).
inline VectorField vertical_lift(const VectorField& y) {
  const std::size_t n = y.dim();
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [idx, name] : free_variables(y[i]))
      if (idx >= static_cast<int>(n))
        throw InvalidArgument("field to lift depends on a non-configuration variable '" + name + "'");
  std::vector<Expr> comps(n, Expr::constant(0.0));
  for (std::size_t i = 0; i < n; ++i) comps.push_back(y[i]);
  return VectorField(std::move(comps));
}

/// Drift = spray, inputs = vertical lifts of the given fields on Q.
inline ControlAffineSystem build_acc_system(const ConnectionSpec& conn, const std::vector<VectorField>& inputs,
                                            std::vector<std::string> control_names = {},
                                            std::vector<Bounds> box = {}) {
  std::vector<VectorField> lifts;
  for (std::size_t c = 0; c < inputs.size(); ++c) {
    if (inputs[c].dim() != conn.n())
      throw DimensionError("input Y" + std::to_string(c + 1) + " has dimension " + std::to_string(inputs[c].dim()) +
                           ", configuration has " + std::to_string(conn.n()));
    lifts.push_back(vertical_lift(inputs[c]));
  }
  return ControlAffineSystem(conn.chart(), std::move(control_names), spray_from_christoffel(conn), std::move(lifts),
                             std::move(box));
}

struct IdentityCheck {
  std::string name;
  std::vector<double> jet;       // numerical jet
  std::vector<double> expected;  // closed form
  double error = 0.0;
  bool pass = false;
};

struct ReductionCheck {
  std::size_t input = 0;
  std::vector<double> lambda;
  double with_xi0 = 0.0;  // <lambda, [xi0, Y^V]>
  double with_spray = 0.0;  // <lambda, [Z, Y^V]>
  bool pass = false;
};

struct GeneratorReport {
  double time = 0.0;
  Point point;
  Control u0;
  std::vector<VectorField> z0;          // Y_c^V
  std::vector<VectorField> z1;          // [xi0, Y_c^V]
  std::vector<VectorField> z1_reduced;  // [Z, Y_c^V]
  std::vector<IdentityCheck> identities;
  std::vector<ReductionCheck> reductions;

  bool all_pass() const {
    for (const auto& c : identities)
      if (!c.pass) return false;
    for (const auto& r : reductions)
      if (!r.pass) return false;
    return true;
  }
};

struct GeneratorOptions {
  double identity_tol = 1e-4;
  double reduction_tol = 1e-9;
  JetOptions jets;
};

/// Builds the families {Y_c^V} and {[xi0, Y_c^V]} at gamma(t) and verifies
/// numerically, for each input i with xi_{+-i} = xi0 +- Y_i^V:
///   j1 of (xi_{+-i} for s, then xi0 for -s)        = +-Y_i^V,
///   j2 of (xi0 for -s, xi_{-i}, xi_{+i}, xi0 for -s) = +kappa [xi0, Y_i^V],
///   j2 of (xi0 for -s, xi_{+i}, xi_{-i}, xi0 for -s) = -kappa [xi0, Y_i^V],
/// plus <lambda, [xi0, Y_i^V]> = <lambda, [Z, Y_i^V]> for a basis of the
/// annihilator of the first family.
inline GeneratorReport mechanical_generators(const ControlAffineSystem& sys, const Trajectory& reference, double t,
                                             const GeneratorOptions& opt = {}) {
  if (!reference.schedule.is_piecewise_constant())
    throw InvalidArgument("the reference control must be piecewise constant");
  GeneratorReport rep;
  rep.time = t;
  rep.point = state_at(sys, reference, t);
  rep.u0 = reference.schedule.at(t);
  const VectorField xi0 = sys.slice(rep.u0);
  const Point& x = rep.point;
  const Expr s = Expr::variable(0, "s");
  const Expr minus_s = Expr::constant(-1.0) * s;

  auto check = [&](std::string name, const VariationRecipe& recipe, int order, std::vector<double> expected) {
    JetOptions jo = opt.jets;
    jo.l_max = order;
    const RecipeJets jets = estimate_jets(recipe, x, jo);
    IdentityCheck c;
    c.name = std::move(name);
    c.jet = jets.forward_mode[static_cast<std::size_t>(order - 1)];
    c.expected = std::move(expected);
    std::vector<double> diff(c.jet.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = c.jet[i] - c.expected[i];
    c.error = norm_inf(diff);
    c.pass = c.error <= opt.identity_tol;
    rep.identities.push_back(std::move(c));
  };

  for (std::size_t i = 0; i < sys.k(); ++i) {
    const VectorField& Y = sys.input(i);
    rep.z0.push_back(Y);
    rep.z1.push_back(lie_bracket(xi0, Y));
    rep.z1_reduced.push_back(lie_bracket(sys.drift(), Y));
    const VectorField plus = xi0 + Y;
    const VectorField minus = xi0 - Y;
    const std::string tag = std::to_string(i + 1);

    const auto y = Y.eval<double>(x);
    std::vector<double> neg_y(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) neg_y[j] = -y[j];
    const auto br = rep.z1.back().eval<double>(x);
    std::vector<double> kb(br.size()), neg_kb(br.size());
    for (std::size_t j = 0; j < br.size(); ++j) {
      kb[j] = kBracketJetFactor * br[j];
      neg_kb[j] = -kb[j];
    }

    check("j1 (xi_+" + tag + ", -xi0) = +Y" + tag + "^V",
          {xi0, {plus}, EndTimeVariation(Expr::constant(0.0), minus_s, {s}), "needle+"}, 1, y);
    check("j1 (xi_-" + tag + ", -xi0) = -Y" + tag + "^V",
          {xi0, {minus}, EndTimeVariation(Expr::constant(0.0), minus_s, {s}), "needle-"}, 1, neg_y);
    check("j2 (-xi0, xi_-" + tag + ", xi_+" + tag + ", -xi0) = +k[xi0,Y" + tag + "^V]",
          {xi0, {minus, plus}, EndTimeVariation(minus_s, minus_s, {s, s}), "commutator-+"}, 2, kb);
    check("j2 (-xi0, xi_+" + tag + ", xi_-" + tag + ", -xi0) = -k[xi0,Y" + tag + "^V]",
          {xi0, {plus, minus}, EndTimeVariation(minus_s, minus_s, {s, s}), "commutator+-"}, 2, neg_kb);
  }

  // Annihilator of the first family at x.
  ConstraintLadder z0_ladder;
  z0_ladder.m = sys.m();
  LadderLevel lv;
  for (std::size_t i = 0; i < rep.z0.size(); ++i) lv.generators.push_back({rep.z0[i], "Y" + std::to_string(i + 1), false});
  z0_ladder.levels.push_back(std::move(lv));
  for (const auto& lam : annihilator_at(x, z0_ladder))
    for (std::size_t i = 0; i < sys.k(); ++i) {
      ReductionCheck r;
      r.input = i;
      r.lambda = lam.components;
      r.with_xi0 = dot(lam.components, rep.z1[i].eval<double>(x));
      r.with_spray = dot(lam.components, rep.z1_reduced[i].eval<double>(x));
      r.pass = std::fabs(r.with_xi0 - r.with_spray) <= opt.reduction_tol;
      rep.reductions.push_back(std::move(r));
    }
  return rep;
}

}  // namespace geocon
