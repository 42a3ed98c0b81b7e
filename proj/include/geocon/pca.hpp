#pragma once

// Constraint ladder for abnormal control-affine analysis: level 0 holds the
// input fields, level i+1 the brackets of the drift and of each input with
// the level-i generators. Span growth is measured pointwise along the
// reference; the annihilator of the stabilized span gives candidate abnormal
// covectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geocon/errors.hpp"
#include "geocon/fields.hpp"
#include "geocon/ocp.hpp"
#include "geocon/system.hpp"

namespace geocon {

inline constexpr double kRankThreshold = 1e-9;
inline constexpr int kDefaultMaxLevels = 6;

struct LadderGenerator {
  VectorField field;
  std::string label;
  /// Dependent generators lie in the span of earlier ones at every sample
  /// point. They remain constraints but are not bracketed further.
  bool dependent = false;
};

struct LadderLevel {
  std::vector<LadderGenerator> generators;
  std::vector<std::size_t> span_dims;  // cumulative, one per sample point
  bool control_branch = false;         // some u-coefficient bracket was nonzero
  std::vector<std::string> pruned;     // symbolically zero or repeated candidates
};

struct ConstraintLadder {
  std::size_t m = 0;
  Mode mode = Mode::Reduced;
  std::vector<double> sample_times;
  std::vector<Point> sample_points;
  std::vector<LadderLevel> levels;
  std::optional<int> stabilized_at;
  std::vector<std::string> cost_terms;  // dF/du^c, extended mode only
  std::string drift_label = "X0";
  std::vector<std::string> input_labels;

  std::vector<const LadderGenerator*> all_generators() const {
    std::vector<const LadderGenerator*> out;
    for (const auto& lv : levels)
      for (const auto& g : lv.generators) out.push_back(&g);
    return out;
  }
};

struct LadderOptions {
  int max_levels = kDefaultMaxLevels;
  std::vector<double> sample_times;  // empty: defaults inside the interval
  std::string drift_label = "X0";
  std::vector<std::string> input_labels;  // empty: X1..Xk
};

/// Numerical rank with singular values below kRankThreshold * largest
/// treated as zero.
inline std::size_t numerical_rank(const Eigen::MatrixXd& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > kRankThreshold * s(0)) ++r;
  return r;
}

namespace detail {

inline Eigen::MatrixXd evaluate_rows(const std::vector<const VectorField*>& fields, const Point& x) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(fields.size()), static_cast<Eigen::Index>(x.size()));
  for (std::size_t r = 0; r < fields.size(); ++r) {
    const auto v = fields[r]->eval<double>(x);
    for (std::size_t j = 0; j < v.size(); ++j) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v[j];
  }
  return M;
}

inline std::vector<const VectorField*> independent_fields(const ConstraintLadder& ladder) {
  std::vector<const VectorField*> out;
  for (const auto* g : ladder.all_generators())
    if (!g->dependent) out.push_back(&g->field);
  return out;
}

inline std::vector<std::size_t> span_dims(const ConstraintLadder& ladder) {
  const auto fields = independent_fields(ladder);
  std::vector<std::size_t> dims;
  for (const auto& x : ladder.sample_points) dims.push_back(numerical_rank(evaluate_rows(fields, x)));
  return dims;
}

inline bool same_up_to_sign(const VectorField& a, const VectorField& b) {
  bool same = true;
  bool neg = true;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    same = same && (a[i] == b[i] || fold(a[i] - b[i]).is_zero());
    neg = neg && (fold(-a[i]) == b[i] || a[i] == fold(-b[i]) || fold(a[i] + b[i]).is_zero());
  }
  return same || neg;
}

}  // namespace detail

/// Default sample times: five interior points, nudged off control breakpoints.
inline std::vector<double> default_sample_times(const Trajectory& reference, std::size_t count = 5) {
  std::vector<double> out;
  const double len = reference.b - reference.a;
  for (std::size_t i = 0; i < count; ++i) {
    double t = reference.a + len * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    if (reference.schedule.is_breakpoint(t, 1e-9)) t += 1e-3 * len / static_cast<double>(count);
    out.push_back(t);
  }
  return out;
}

/// Level 0: the nonzero input fields. With k = 0 the ladder is empty and
/// stabilized at 0.
inline ConstraintLadder primary_constraints(const HamiltonianModel& model, const Trajectory& reference,
                                            const LadderOptions& opt = {}) {
  const ControlAffineSystem& sys = model.base();
  ConstraintLadder ladder;
  ladder.m = sys.m();
  ladder.mode = model.mode();
  ladder.sample_times = opt.sample_times.empty() ? default_sample_times(reference) : opt.sample_times;
  if (ladder.sample_times.size() < 3) throw InvalidArgument("the ladder needs at least three sample times");
  for (double t : ladder.sample_times) {
    if (t < reference.a || t > reference.b) throw InvalidArgument("ladder sample time outside the reference interval");
    if (reference.schedule.is_breakpoint(t)) throw InvalidArgument("ladder sample time on a control breakpoint");
    ladder.sample_points.push_back(state_at(sys, reference, t));
  }
  ladder.drift_label = opt.drift_label;
  ladder.input_labels = opt.input_labels;
  if (ladder.input_labels.empty())
    for (std::size_t c = 0; c < sys.k(); ++c) ladder.input_labels.push_back("X" + std::to_string(c + 1));
  if (ladder.input_labels.size() != sys.k()) throw DimensionError("input labels differ from input count");
  if (model.mode() == Mode::Extended)
    for (const auto& e : model.extended().cost_du()) ladder.cost_terms.push_back(e.to_string());

  LadderLevel lv;
  for (std::size_t c = 0; c < sys.k(); ++c) {
    if (sys.input(c).is_zero()) {
      lv.pruned.push_back(ladder.input_labels[c]);
      continue;
    }
    lv.generators.push_back({sys.input(c), ladder.input_labels[c], false});
  }
  ladder.levels.push_back(std::move(lv));
  ladder.levels.back().span_dims = detail::span_dims(ladder);

  const auto& dims = ladder.levels.back().span_dims;
  if (ladder.levels.back().generators.empty() ||
      std::all_of(dims.begin(), dims.end(), [&](std::size_t d) { return d == ladder.m; }))
    ladder.stabilized_at = 0;
  return ladder;
}

/// Adds level i+1: [X0, Z] for every independent level-i generator Z, then
/// [X_d, Z] for each input d. Zero and repeated fields are pruned; fields
/// already in the pointwise span are kept as dependent constraints.
inline void ladder_step(ConstraintLadder& ladder, const ControlAffineSystem& sys) {
  if (ladder.levels.empty()) throw InvalidArgument("ladder has no primary level");
  const LadderLevel& last = ladder.levels.back();
  LadderLevel next;

  struct Candidate {
    VectorField field;
    std::string label;
    bool from_input;
  };
  std::vector<Candidate> cands;
  for (const auto& g : last.generators) {
    if (g.dependent) continue;
    cands.push_back({lie_bracket(sys.drift(), g.field), "[" + ladder.drift_label + "," + g.label + "]", false});
  }
  for (std::size_t d = 0; d < sys.k(); ++d)
    for (const auto& g : last.generators) {
      if (g.dependent) continue;
      cands.push_back({lie_bracket(sys.input(d), g.field), "[" + ladder.input_labels[d] + "," + g.label + "]", true});
    }

  auto fields = detail::independent_fields(ladder);
  std::vector<std::size_t> base_dims = detail::span_dims(ladder);
  const auto existing = ladder.all_generators();
  for (auto& c : cands) {
    if (c.field.is_zero()) {
      next.pruned.push_back(c.label);
      continue;
    }
    if (c.from_input) next.control_branch = true;
    bool repeated = false;
    for (const auto* g : existing) repeated = repeated || detail::same_up_to_sign(g->field, c.field);
    for (const auto& g : next.generators) repeated = repeated || detail::same_up_to_sign(g.field, c.field);
    if (repeated) {
      next.pruned.push_back(c.label);
      continue;
    }
    fields.push_back(&c.field);
    bool grows = false;
    for (std::size_t p = 0; p < ladder.sample_points.size(); ++p) {
      const std::size_t r = numerical_rank(detail::evaluate_rows(fields, ladder.sample_points[p]));
      if (r > base_dims[p]) {
        grows = true;
        base_dims[p] = r;
      }
    }
    next.generators.push_back({std::move(c.field), c.label, !grows});
    fields = detail::independent_fields(ladder);
    for (const auto& g : next.generators)
      if (!g.dependent) fields.push_back(&g.field);
  }
  next.span_dims = base_dims;
  ladder.levels.push_back(std::move(next));
}

/// Iterates ladder_step until a level adds no independent direction or the
/// span is full at every sample point; unset stabilized_at means max_levels
/// was reached first.
inline ConstraintLadder run_algorithm(const HamiltonianModel& model, const Trajectory& reference,
                                      const LadderOptions& opt = {}) {
  ConstraintLadder ladder = primary_constraints(model, reference, opt);
  for (int level = 1; !ladder.stabilized_at && level <= opt.max_levels; ++level) {
    ladder_step(ladder, model.base());
    const LadderLevel& lv = ladder.levels.back();
    const bool added = std::any_of(lv.generators.begin(), lv.generators.end(),
                                   [](const LadderGenerator& g) { return !g.dependent; });
    const bool full = std::all_of(lv.span_dims.begin(), lv.span_dims.end(),
                                  [&](std::size_t d) { return d == ladder.m; });
    if (!added || full) ladder.stabilized_at = level;
  }
  return ladder;
}

/// Canonical basis of a subspace given by columns: reduced row echelon form
/// of the transposed basis, orthonormalized, largest component positive.
inline std::vector<std::vector<double>> canonical_basis(const Eigen::MatrixXd& columns) {
  Eigen::MatrixXd R = columns.transpose();
  const Eigen::Index rows = R.rows();
  const Eigen::Index cols = R.cols();
  Eigen::Index lead = 0;
  for (Eigen::Index r = 0; r < rows && lead < cols; ++lead) {
    Eigen::Index piv = r;
    for (Eigen::Index i = r + 1; i < rows; ++i)
      if (std::fabs(R(i, lead)) > std::fabs(R(piv, lead))) piv = i;
    if (std::fabs(R(piv, lead)) < 1e-9) continue;
    R.row(piv).swap(R.row(r));
    R.row(r) /= R(r, lead);
    for (Eigen::Index i = 0; i < rows; ++i)
      if (i != r) R.row(i) -= R(i, lead) * R.row(r);
    ++r;
  }
  std::vector<std::vector<double>> out;
  std::vector<Eigen::VectorXd> done;
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::VectorXd v = R.row(r).transpose();
    for (const auto& q : done) v -= q.dot(v) * q;
    const double n = v.norm();
    if (n < 1e-9) continue;
    v /= n;
    Eigen::Index big = 0;
    for (Eigen::Index j = 1; j < v.size(); ++j)
      if (std::fabs(v(j)) > std::fabs(v(big)) + 1e-12) big = j;
    if (v(big) < 0.0) v = -v;
    for (Eigen::Index j = 0; j < v.size(); ++j)
      if (std::fabs(v(j)) < 1e-15) v(j) = 0.0;
    done.push_back(v);
    out.emplace_back(v.data(), v.data() + v.size());
  }
  return out;
}

/// Orthonormal basis of the covectors annihilating every ladder generator
/// at x; empty when the generators span the tangent space.
inline std::vector<Covector> annihilator_at(const Point& x, const ConstraintLadder& ladder) {
  if (x.size() != ladder.m) throw DimensionError("point has wrong dimension for the ladder");
  std::vector<const VectorField*> fields;
  for (const auto* g : ladder.all_generators()) fields.push_back(&g->field);
  const auto m = static_cast<Eigen::Index>(ladder.m);
  Eigen::MatrixXd null;
  if (fields.empty()) {
    null = Eigen::MatrixXd::Identity(m, m);
  } else {
    const Eigen::MatrixXd M = detail::evaluate_rows(fields, x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    if (s.size() > 0 && s(0) > 0.0)
      for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > kRankThreshold * s(0)) ++r;
    null = svd.matrixV().rightCols(m - r);
  }
  std::vector<Covector> out;
  for (auto& v : canonical_basis(null)) out.push_back({x, std::move(v)});
  return out;
}

/// Goh-type matrix G(d, c) = <lambda, [X_d, X_c](x)>.
inline std::vector<std::vector<double>> goh_matrix(const ControlAffineSystem& sys, const Covector& lambda) {
  const std::size_t k = sys.k();
  std::vector<std::vector<double>> G(k, std::vector<double>(k, 0.0));
  for (std::size_t d = 0; d < k; ++d)
    for (std::size_t c = d + 1; c < k; ++c) {
      const double v = dot(lambda.components, lie_bracket(sys.input(d), sys.input(c)).eval<double>(lambda.base));
      G[d][c] = v;
      G[c][d] = -v;
    }
  return G;
}

struct PairingDerivative {
  double numeric = 0.0;
  double symbolic = 0.0;
};

/// d/dt <lambda(t), Z(x(t))> by central differences of single RK4 steps of
/// +-delta on the reduced Hamiltonian system with control u, against
/// <lambda, [xi_u, Z](x)>.
inline PairingDerivative pairing_derivative(const ControlAffineSystem& sys, const Control& u, const Point& x,
                                            const std::vector<double>& lambda, const VectorField& Z,
                                            double delta = 1e-4) {
  const HamiltonianModel model(sys);
  auto rhs = [&](double, const std::vector<double>& y) { return model.rhs(y, u); };
  auto g = [&](double dt) {
    std::vector<double> y(x);
    y.insert(y.end(), lambda.begin(), lambda.end());
    rk4_step<double>(rhs, 0.0, y, dt);
    const std::size_t m = sys.m();
    const std::vector<double> xs(y.begin(), y.begin() + static_cast<long>(m));
    const std::vector<double> ls(y.begin() + static_cast<long>(m), y.end());
    return dot(ls, Z.eval<double>(xs));
  };
  PairingDerivative out;
  out.numeric = (g(delta) - g(-delta)) / (2.0 * delta);
  out.symbolic = dot(lambda, lie_bracket(sys.slice(u), Z).eval<double>(x));
  return out;
}

}  // namespace geocon
