#pragma once

// Command dispatch for the geocon tool. Each command delegates to a module
// operation and returns either a JSON report or CSV text plus an exit code:
// 0 success, 2 analysis verdict failure, 1 error.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geocon/cone.hpp"
#include "geocon/mech.hpp"
#include "geocon/ocp.hpp"
#include "geocon/pca.hpp"
#include "geocon/report.hpp"
#include "geocon/scenario.hpp"
#include "geocon/variations.hpp"

namespace geocon {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdict = 2;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"bracket", "flow",    "variation", "cone",
                                              "pca",     "extremal", "audit",    "mech-check"};
  return names;
}

struct CliOptions {
  std::optional<std::vector<double>> covector;
  std::optional<double> time;
  std::optional<double> step;
  std::uint64_t seed = 0;
};

struct CommandResult {
  int exit_code = kExitOk;
  bool csv = false;
  std::string text;
};

/// Parses "c0,c1,..." into numbers.
inline std::vector<double> parse_number_list(const std::string& src) {
  std::vector<double> out;
  std::stringstream ss(src);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("'" + item + "' is not a number");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size()) throw InvalidArgument("'" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty number list");
  return out;
}

/// Field names accepted in bracket expressions: X0 or Z for the drift, Xc,
/// Yc or Yc^V for input c.
inline VectorField resolve_field(const ControlAffineSystem& sys, const std::string& name) {
  if (name == "X0" || name == "Z") return sys.drift();
  std::string digits;
  if (name.size() > 1 && (name[0] == 'X' || name[0] == 'Y')) {
    digits = name.substr(1);
    if (name[0] == 'Y' && digits.size() > 2 && digits.substr(digits.size() - 2) == "^V")
      digits.resize(digits.size() - 2);
  }
  if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(c); })) {
    const std::size_t c = std::stoul(digits);
    if (c >= 1 && c <= sys.k()) return sys.input(c - 1);
  }
  throw UnknownIdentifierError(name, 1);
}

/// Parses and evaluates "[A,[B,C]]" style nested brackets.
inline VectorField parse_bracket(const ControlAffineSystem& sys, const std::string& src) {
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  };
  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("bracket '" + src + "': " + what, static_cast<int>(pos + 1));
  };
  std::function<VectorField()> term = [&]() -> VectorField {
    skip();
    if (pos < src.size() && src[pos] == '[') {
      ++pos;
      VectorField a = term();
      skip();
      if (pos >= src.size() || src[pos] != ',') throw fail("expected ','");
      ++pos;
      VectorField b = term();
      skip();
      if (pos >= src.size() || src[pos] != ']') throw fail("expected ']'");
      ++pos;
      return lie_bracket(a, b);
    }
    const std::size_t start = pos;
    while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '^' ||
                                src[pos] == '_'))
      ++pos;
    if (start == pos) throw fail("expected a field name or '['");
    return resolve_field(sys, src.substr(start, pos - start));
  };
  VectorField out = term();
  skip();
  if (pos != src.size()) throw fail("trailing input");
  return out;
}

namespace detail {

inline Json report_header(const std::string& cmd, const Scenario& sc, const CliOptions& opt) {
  Json r;
  r["schema_version"] = kReportSchemaVersion;
  r["command"] = cmd;
  r["scenario"] = sc.name;
  r["scenario_digest"] = sc.digest;
  r["seed"] = opt.seed;
  return r;
}

inline Scenario with_step(Scenario sc, const CliOptions& opt) {
  if (opt.step) {
    if (!(*opt.step > 0.0)) throw InvalidArgument("--step must be positive");
    if (sc.reference) sc.reference->step = *opt.step;
    sc.analysis.jets.step = *opt.step;
  }
  return sc;
}

inline Json render_field(const VectorField& f) { return strings(f.render()); }

inline std::vector<double> cone_sample_times(const Scenario& sc, const Trajectory& ref, double t) {
  std::vector<double> out;
  for (double s : sc.analysis.sample_times)
    if (s > ref.a && s <= t) out.push_back(s);
  if (out.empty())
    for (int i = 0; i < 3; ++i) out.push_back(ref.a + (t - ref.a) * (i + 0.5) / 3.0);
  return out;
}

inline double cone_time(const Scenario& sc, const Trajectory& ref, const CliOptions& opt) {
  const double t = opt.time ? *opt.time : sc.analysis.cone_time ? *sc.analysis.cone_time : 0.5 * (ref.a + ref.b);
  if (t <= ref.a || t > ref.b) throw InvalidArgument("cone time must lie in (a, b]");
  return t;
}

inline SamplingOptions sampling(const Scenario& sc) {
  SamplingOptions so;
  so.max_order = sc.analysis.max_order;
  so.budget = sc.analysis.per_time_budget;
  so.control_grid = sc.analysis.control_grid;
  so.jets = sc.analysis.jets;
  return so;
}

inline LadderOptions ladder_options(const Scenario& sc) {
  LadderOptions lo;
  lo.max_levels = sc.analysis.max_levels;
  lo.sample_times = sc.analysis.sample_times;
  lo.drift_label = sc.drift_label();
  lo.input_labels = sc.input_labels();
  return lo;
}

inline Json cone_json(const Cone& cone) {
  Json gens = Json::array();
  for (std::size_t i = 0; i < cone.size(); ++i) {
    Json g;
    g["vector"] = numbers(cone.generators()[i]);
    g["t0"] = cone.provenance()[i].t0;
    g["order"] = cone.provenance()[i].order;
    g["kind"] = cone.provenance()[i].recipe;
    gens.push_back(std::move(g));
  }
  Json c;
  c["base"] = numbers(cone.base());
  c["generators"] = std::move(gens);
  return c;
}

inline Json support_json(const SupportReport& s) {
  Json j;
  j["feasible"] = s.feasible;
  j["covector"] = s.covector ? numbers(s.covector->components) : Json();
  j["max_pairing"] = s.max_pairing;
  j["separating_margin"] = s.separating_margin ? Json(*s.separating_margin) : Json();
  return j;
}

inline Json ladder_json(const ConstraintLadder& L, const ControlAffineSystem& sys) {
  Json levels = Json::array();
  for (std::size_t i = 0; i < L.levels.size(); ++i) {
    const auto& lv = L.levels[i];
    Json gens = Json::array();
    for (const auto& g : lv.generators) {
      Json gj;
      gj["label"] = g.label;
      gj["components"] = render_field(g.field);
      gj["dependent"] = g.dependent;
      gens.push_back(std::move(gj));
    }
    Json lj;
    lj["level"] = i;
    lj["generators"] = std::move(gens);
    Json dims = Json::array();
    for (auto d : lv.span_dims) dims.push_back(d);
    lj["span_dims"] = std::move(dims);
    lj["control_branch"] = lv.control_branch;
    lj["pruned"] = strings(lv.pruned);
    levels.push_back(std::move(lj));
  }
  Json points = Json::array();
  bool all_trivial = true;
  for (std::size_t p = 0; p < L.sample_points.size(); ++p) {
    const auto ann = annihilator_at(L.sample_points[p], L);
    all_trivial = all_trivial && ann.empty();
    Json basis = Json::array();
    for (const auto& c : ann) basis.push_back(numbers(c.components));
    Json pj;
    pj["t"] = L.sample_times[p];
    pj["point"] = numbers(L.sample_points[p]);
    pj["annihilator"] = std::move(basis);
    if (!ann.empty() && sys.k() > 1) {
      Json goh = Json::array();
      for (const auto& row : goh_matrix(sys, ann.front())) goh.push_back(numbers(row));
      pj["goh_matrix_first_covector"] = std::move(goh);
    }
    points.push_back(std::move(pj));
  }
  Json j;
  j["mode"] = to_string(L.mode);
  j["stabilized_at"] = L.stabilized_at ? Json(*L.stabilized_at) : Json();
  if (!L.cost_terms.empty()) j["cost_terms"] = strings(L.cost_terms);
  j["levels"] = std::move(levels);
  j["samples"] = std::move(points);
  j["verdict"] = all_trivial ? "annihilator trivial; no abnormal biextremal along reference"
                             : "nontrivial annihilator; candidate abnormal covectors along reference";
  return j;
}

inline std::vector<double> initial_covector(const Scenario& sc, const HamiltonianModel& model,
                                            const CliOptions& opt) {
  std::optional<std::vector<double>> c = opt.covector ? opt.covector : sc.analysis.covector;
  if (!c) throw InvalidArgument("a covector is required (--covector or analysis.covector)");
  if (model.mode() == Mode::Extended && c->size() == model.base().m()) c->insert(c->begin(), 0.0);
  if (c->size() != model.dim())
    throw DimensionError("covector has " + std::to_string(c->size()) + " components, expected " +
                         std::to_string(model.base().m()) +
                         (model.mode() == Mode::Extended ? " or " + std::to_string(model.dim()) : std::string()));
  return *c;
}

inline double max_ladder_pairing(const ConstraintLadder& L, const Biextremal& bx) {
  const std::size_t off = bx.mode == Mode::Extended ? 1 : 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < bx.times.size(); ++i) {
    const std::vector<double> x(bx.states[i].begin() + static_cast<long>(off), bx.states[i].end());
    const std::vector<double> p(bx.momenta[i].begin() + static_cast<long>(off), bx.momenta[i].end());
    for (const auto* g : L.all_generators()) worst = std::max(worst, std::fabs(dot(p, g->field.eval<double>(x))));
  }
  return worst;
}

inline Json biextremal_samples(const Biextremal& bx, std::size_t max_rows = 101) {
  Json rows = Json::array();
  const std::size_t n = bx.times.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_rows - 2) / (max_rows - 1));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (n > 0 && idx.back() != n - 1) idx.push_back(n - 1);
  for (std::size_t i : idx) {
    Json r;
    r["t"] = bx.times[i];
    r["x"] = numbers(bx.states[i]);
    r["lambda"] = numbers(bx.momenta[i]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Json search_json(const NormalLiftSearch& s) {
  Json j;
  j["grid"] = s.grid;
  j["tried"] = s.tried;
  j["satisfying"] = s.satisfying;
  j["best_residual"] = s.best_residual;
  j["witness"] = s.witness ? numbers(*s.witness) : Json();
  return j;
}

inline std::string csv_line(double t, const std::vector<double>& v) {
  std::string line = format_number(t);
  for (double x : v) line += "," + format_number(x);
  return line + "\n";
}

}  // namespace detail

inline CommandResult run_command(const std::string& cmd, const Scenario& scenario_in, const CliOptions& opt = {}) {
  using namespace detail;
  const Scenario sc = with_step(scenario_in, opt);
  const ControlAffineSystem& sys = sc.system;
  CommandResult res;
  Json r = report_header(cmd, sc, opt);

  if (cmd == "bracket") {
    std::vector<std::string> exprs = sc.analysis.brackets;
    if (exprs.empty()) {
      const bool drift = !sys.drift().is_zero();
      const auto labels = sc.input_labels();
      std::vector<std::string> names;
      if (drift) names.push_back(sc.drift_label());
      names.insert(names.end(), labels.begin(), labels.end());
      for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j) exprs.push_back("[" + names[i] + "," + names[j] + "]");
    }
    std::optional<Point> x;
    if (sc.reference) {
      const Trajectory ref = sc.simulate();
      x = opt.time ? state_at(sys, ref, *opt.time) : ref.points.front();
    }
    Json list = Json::array();
    for (const auto& e : exprs) {
      const VectorField f = parse_bracket(sys, e);
      Json b;
      b["expression"] = e;
      b["components"] = render_field(f);
      b["symbolically_zero"] = f.is_zero();
      if (x) {
        b["point"] = numbers(*x);
        b["value"] = numbers(f.eval<double>(*x));
      }
      list.push_back(std::move(b));
    }
    r["brackets"] = std::move(list);
  } else if (cmd == "flow") {
    const Trajectory ref = sc.simulate();
    std::string out = "t";
    for (const auto& n : sys.state_names()) out += "," + n;
    out += "\n";
    for (std::size_t i = 0; i < ref.times.size(); ++i) out += csv_line(ref.times[i], ref.points[i]);
    res.csv = true;
    res.text = std::move(out);
    return res;
  } else if (cmd == "variation") {
    if (!sc.analysis.variation) throw SchemaError("/analysis/variation", "block is required for this command");
    const auto& vs = *sc.analysis.variation;
    const Trajectory ref = sc.simulate();
    const double t0 = opt.time ? *opt.time : vs.time ? *vs.time : 0.5 * (ref.a + ref.b);
    const Point x = state_at(sys, ref, t0);
    std::vector<VectorField> seq;
    for (const auto& u : vs.controls) seq.push_back(sys.slice(u));
    const VariationRecipe recipe{sys.slice(ref.schedule.at(t0)), seq,
                                 EndTimeVariation::parse(vs.q1, vs.q2, vs.tau, vs.s_max), "scenario"};
    std::string out = "s";
    for (const auto& n : sys.state_names()) out += "," + n;
    out += "\n";
    for (int i = 0; i < vs.samples; ++i) {
      const double s = vs.s_max * i / (vs.samples - 1);
      out += csv_line(s, variation_curve<double>(recipe, x, s, sc.analysis.jets.step));
    }
    res.csv = true;
    res.text = std::move(out);
    return res;
  } else if (cmd == "cone") {
    const Trajectory ref = sc.simulate();
    const double t = cone_time(sc, ref, opt);
    const auto times = cone_sample_times(sc, ref, t);
    const Cone cone = assemble_cone(sys, ref, t, times, sampling(sc));
    const SupportReport sup = find_supporting_covector(cone, sc.analysis.decrease_direction);
    r["time"] = t;
    r["sample_times"] = numbers(times);
    r["cone"] = cone_json(cone);
    r["support"] = support_json(sup);
    r["verdict"] = sup.feasible ? "supporting covector found" : "no supporting covector: cone spans the space";
    if (!sup.feasible) res.exit_code = kExitVerdict;
  } else if (cmd == "pca") {
    const Trajectory ref = sc.simulate();
    const ConstraintLadder L = run_algorithm(sc.model(), ref, ladder_options(sc));
    r["ladder"] = ladder_json(L, sys);
    if (!L.stabilized_at) res.exit_code = kExitVerdict;
  } else if (cmd == "extremal") {
    const auto& rs = sc.require_reference();
    const HamiltonianModel model = sc.model();
    const auto lam0 = initial_covector(sc, model, opt);
    const Biextremal bx = integrate_biextremal(model, rs.initial_point, lam0, rs.schedule, rs.a, rs.b, rs.step);
    const Trajectory ref = sc.simulate();
    const ConstraintLadder L = run_algorithm(model, ref, ladder_options(sc));
    double hmin = 0.0, hmax = 0.0;
    for (std::size_t i = 0; i < bx.times.size(); ++i) {
      const double H = model.hamiltonian(bx.momenta[i], bx.states[i], bx.schedule.at(bx.times[i]));
      hmin = i ? std::min(hmin, H) : H;
      hmax = i ? std::max(hmax, H) : H;
    }
    r["mode"] = to_string(model.mode());
    r["initial_covector"] = numbers(lam0);
    r["sample_count"] = bx.times.size();
    r["hamiltonian_range"] = numbers({hmin, hmax});
    r["max_ladder_pairing"] = max_ladder_pairing(L, bx);
    r["ladder_stabilized_at"] = L.stabilized_at ? Json(*L.stabilized_at) : Json();
    if (model.mode() == Mode::Extended) {
      std::optional<NormalLiftSearch> search;
      if (std::fabs(lam0[0]) <= 1e-12) search = search_normal_lift(model.extended(), ref, sc.analysis.normal_lift);
      const Classification c = classify_extremal(bx, search);
      Json cj;
      cj["kind"] = c.kind == ExtremalKind::Normal ? "normal" : "abnormal";
      cj["lambda0"] = c.lambda0;
      cj["verdict"] = c.verdict;
      cj["inconclusive"] = c.inconclusive;
      if (c.search) cj["normal_lift_search"] = search_json(*c.search);
      r["classification"] = std::move(cj);
    }
    r["samples"] = biextremal_samples(bx);
  } else if (cmd == "audit") {
    const auto& rs = sc.require_reference();
    const HamiltonianModel model = sc.model();
    const auto lam0 = initial_covector(sc, model, opt);
    const Trajectory ref = sc.simulate();
    const double t = cone_time(sc, ref, opt);
    const Biextremal bx =
        integrate_biextremal(model, rs.initial_point, lam0, rs.schedule, rs.a, rs.b, rs.step, {t});
    const auto times = cone_sample_times(sc, ref, t);
    const Cone cone = assemble_cone(sys, ref, t, times, sampling(sc));
    AuditOptions ao;
    ao.stationarity_tol = sc.analysis.stationarity_tol;
    if (sc.analysis.grid_max_check) ao.max_check_grid = sc.analysis.control_grid;
    const AuditReport au = audit_necessary_conditions(model, bx, cone, t, ao);
    auto cond_json = [](const AuditCondition& c) {
      Json j;
      j["id"] = c.id;
      j["name"] = c.name;
      j["pass"] = c.pass;
      j["value"] = c.value;
      j["tolerance"] = c.tolerance;
      j["detail"] = c.detail;
      return j;
    };
    Json conds = Json::array();
    for (const auto& c : au.conditions) conds.push_back(cond_json(c));
    r["mode"] = to_string(model.mode());
    r["initial_covector"] = numbers(lam0);
    r["cone_time"] = t;
    r["cone_generator_count"] = cone.size();
    r["conditions"] = std::move(conds);
    if (au.grid_maximization) r["grid_maximization"] = cond_json(*au.grid_maximization);
    r["hamiltonian_range"] = numbers({au.h_min, au.h_max});
    r["all_pass"] = au.all_pass();
    if (!au.all_pass()) res.exit_code = kExitVerdict;
  } else if (cmd == "mech-check") {
    if (!sc.mechanics) throw SchemaError("/mechanics", "block is required for this command");
    const Trajectory ref = sc.simulate();
    const double t = opt.time ? *opt.time : sc.analysis.mech_time ? *sc.analysis.mech_time : 0.5 * (ref.a + ref.b);
    GeneratorOptions so;
    so.jets = sc.analysis.jets;
    const GeneratorReport rep = mechanical_generators(sys, ref, t, so);
    auto fam = [](const std::vector<VectorField>& fs) {
      Json a = Json::array();
      for (const auto& f : fs) a.push_back(render_field(f));
      return a;
    };
    r["time"] = t;
    r["point"] = numbers(rep.point);
    r["u0"] = numbers(rep.u0);
    r["spray"] = render_field(sys.drift());
    r["z0"] = fam(rep.z0);
    r["z1"] = fam(rep.z1);
    r["z1_reduced"] = fam(rep.z1_reduced);
    Json ids = Json::array();
    for (const auto& c : rep.identities) {
      Json j;
      j["name"] = c.name;
      j["jet"] = numbers(c.jet);
      j["expected"] = numbers(c.expected);
      j["error"] = c.error;
      j["pass"] = c.pass;
      ids.push_back(std::move(j));
    }
    r["identities"] = std::move(ids);
    Json reds = Json::array();
    for (const auto& c : rep.reductions) {
      Json j;
      j["input"] = c.input + 1;
      j["lambda"] = numbers(c.lambda);
      j["with_xi0"] = c.with_xi0;
      j["with_spray"] = c.with_spray;
      j["pass"] = c.pass;
      reds.push_back(std::move(j));
    }
    r["reductions"] = std::move(reds);
    r["all_pass"] = rep.all_pass();
    if (!rep.all_pass()) res.exit_code = kExitVerdict;
  } else {
    throw InvalidArgument("unknown command '" + cmd + "'");
  }
  res.text = to_json_text(r);
  return res;
}

}  // namespace geocon
