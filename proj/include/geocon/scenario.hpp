#pragma once

// Scenario files: a JSON document describing a control-affine system (or an
// affine-connection system on TQ), an optional running cost, a reference
// trajectory and analysis options. See docs/schema.json.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geocon/errors.hpp"
#include "geocon/mech.hpp"
#include "geocon/ocp.hpp"
#include "geocon/system.hpp"

namespace geocon {

using Json = nlohmann::ordered_json;

/// Schema violation located by a JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& pointer, const std::string& msg)
      : Error((pointer.empty() ? std::string("/") : pointer) + ": " + msg), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct ReferenceSpec {
  Point initial_point;
  double a = 0.0;
  double b = 1.0;
  double step = kDefaultStep;
  ControlSchedule schedule;
};

struct VariationSpec {
  std::optional<double> time;
  std::string q1 = "0";
  std::string q2 = "0";
  std::vector<Control> controls;  // xi_u for each entry of the sequence
  std::vector<std::string> tau;
  double s_max = 0.1;
  int samples = 21;
};

struct AnalysisSpec {
  std::vector<double> sample_times;
  std::optional<double> cone_time;
  std::size_t per_time_budget = 64;
  int max_levels = kDefaultMaxLevels;
  int max_order = 2;
  std::vector<double> control_grid{-1.0, 0.0, 1.0};
  std::vector<std::string> brackets;
  std::optional<std::vector<double>> covector;
  std::optional<std::vector<double>> decrease_direction;
  std::optional<VariationSpec> variation;
  std::optional<double> mech_time;
  JetOptions jets;
  double stationarity_tol = 1e-8;
  NormalLiftOptions normal_lift;
  bool grid_max_check = false;
};

struct MechanicsSpec {
  ConnectionSpec connection;
  std::vector<VectorField> inputs_on_q;
};

struct Scenario {
  std::string name;
  std::vector<std::string> chart;
  std::vector<std::string> controls;
  ControlAffineSystem system;
  std::optional<MechanicsSpec> mechanics;
  std::optional<std::string> cost;
  std::optional<ReferenceSpec> reference;
  AnalysisSpec analysis;
  std::string digest;

  HamiltonianModel model() const {
    if (cost) return HamiltonianModel(ExtendedSystem::parse(system, *cost));
    return HamiltonianModel(system);
  }

  const ReferenceSpec& require_reference() const {
    if (!reference) throw SchemaError("/reference", "block is required for this command");
    return *reference;
  }

  Trajectory simulate() const {
    const auto& r = require_reference();
    return simulate_reference(system, r.schedule, r.initial_point, r.a, r.b, r.step);
  }

  /// Field labels: X0 for the drift, X1..Xk for the inputs.
  std::string drift_label() const { return mechanics ? "Z" : "X0"; }
  std::vector<std::string> input_labels() const {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < system.k(); ++c)
      out.push_back((mechanics ? "Y" : "X") + std::to_string(c + 1) + (mechanics ? "^V" : ""));
    return out;
  }
};

/// 64-bit FNV-1a of the bytes, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string esc;
  for (char c : key) {
    if (c == '~') esc += "~0";
    else if (c == '/') esc += "~1";
    else esc += c;
  }
  return ptr + "/" + esc;
}
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

inline const Json& require(const Json& obj, const std::string& ptr, const std::string& key) {
  if (!obj.contains(key)) throw SchemaError(child(ptr, key), "required member is missing");
  return obj.at(key);
}

inline void expect_object(const Json& j, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
}

inline void check_members(const Json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError(child(ptr, it.key()), "unknown member");
  }
}

inline double as_number(const Json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

inline std::string as_string(const Json& j, const std::string& ptr) {
  if (!j.is_string()) throw SchemaError(ptr, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> as_numbers(const Json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], child(ptr, i)));
  return out;
}

inline std::vector<std::string> as_strings(const Json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_string(j[i], child(ptr, i)));
  return out;
}

/// Runs f, rewrapping expression errors with the pointer of the offending
/// string.
template <class F>
auto at_pointer(const std::string& ptr, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(ptr, e.what());
  }
}

inline VectorField parse_field(const Json& j, const std::string& ptr, const std::vector<std::string>& vars,
                               std::size_t dim) {
  const auto comps = as_strings(j, ptr);
  if (comps.size() != dim)
    throw SchemaError(ptr, "field has " + std::to_string(comps.size()) + " components, chart has " +
                               std::to_string(dim));
  std::vector<Expr> es;
  for (std::size_t i = 0; i < comps.size(); ++i)
    es.push_back(at_pointer(child(ptr, i), [&] { return parse_expression(comps[i], vars); }));
  return VectorField(std::move(es));
}

inline std::vector<VectorField> parse_fields(const Json& j, const std::string& ptr,
                                             const std::vector<std::string>& vars, std::size_t dim) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of component lists");
  std::vector<VectorField> out;
  for (std::size_t c = 0; c < j.size(); ++c) out.push_back(parse_field(j[c], child(ptr, c), vars, dim));
  return out;
}

inline std::vector<Bounds> parse_box(const Json& j, const std::string& ptr, std::size_t k) {
  if (!j.is_array() || j.size() != k) throw SchemaError(ptr, "expected one [lower, upper] pair per control");
  std::vector<Bounds> box;
  for (std::size_t c = 0; c < k; ++c) {
    const std::string p = child(ptr, c);
    if (!j[c].is_array() || j[c].size() != 2) throw SchemaError(p, "expected a [lower, upper] pair");
    Bounds b;
    if (!j[c][0].is_null()) b.lower = as_number(j[c][0], child(p, 0));
    if (!j[c][1].is_null()) b.upper = as_number(j[c][1], child(p, 1));
    if (!(b.lower < b.upper)) throw SchemaError(p, "bounds must satisfy lower < upper");
    box.push_back(b);
  }
  return box;
}

inline ReferenceSpec parse_reference(const Json& j, const std::string& ptr, std::size_t m, std::size_t k) {
  expect_object(j, ptr);
  check_members(j, ptr, {"initial_point", "interval", "step", "controls", "control_expressions"});
  ReferenceSpec r;
  r.initial_point = as_numbers(require(j, ptr, "initial_point"), child(ptr, "initial_point"));
  if (r.initial_point.size() != m)
    throw SchemaError(child(ptr, "initial_point"), "expected " + std::to_string(m) + " coordinates");
  const auto iv = as_numbers(require(j, ptr, "interval"), child(ptr, "interval"));
  if (iv.size() != 2 || !(iv[0] <= iv[1])) throw SchemaError(child(ptr, "interval"), "expected [a, b] with a <= b");
  r.a = iv[0];
  r.b = iv[1];
  if (j.contains("step")) {
    r.step = as_number(j["step"], child(ptr, "step"));
    if (!(r.step > 0.0)) throw SchemaError(child(ptr, "step"), "step must be positive");
  }
  const bool pw = j.contains("controls");
  const bool ex = j.contains("control_expressions");
  if (pw == ex) throw SchemaError(ptr, "exactly one of 'controls' or 'control_expressions' is required");
  if (pw) {
    const std::string p = child(ptr, "controls");
    const Json& arr = j["controls"];
    if (!arr.is_array() || arr.empty()) throw SchemaError(p, "expected a nonempty array of {t, u} pieces");
    std::vector<std::pair<double, Control>> pieces;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string pi = child(p, i);
      expect_object(arr[i], pi);
      check_members(arr[i], pi, {"t", "u"});
      const double t = as_number(require(arr[i], pi, "t"), child(pi, "t"));
      auto u = as_numbers(require(arr[i], pi, "u"), child(pi, "u"));
      if (u.size() != k) throw SchemaError(child(pi, "u"), "expected " + std::to_string(k) + " control values");
      pieces.emplace_back(t, std::move(u));
    }
    if (pieces.front().first > r.a) throw SchemaError(child(p, 0), "schedule must start at or before the interval");
    r.schedule = at_pointer(p, [&] { return ControlSchedule::piecewise(std::move(pieces)); });
  } else {
    const std::string p = child(ptr, "control_expressions");
    const auto srcs = as_strings(j["control_expressions"], p);
    if (srcs.size() != k) throw SchemaError(p, "expected " + std::to_string(k) + " expressions");
    std::vector<Expr> es;
    const std::vector<std::string> tvar{"t"};
    for (std::size_t i = 0; i < srcs.size(); ++i)
      es.push_back(at_pointer(child(p, i), [&] { return parse_expression(srcs[i], tvar); }));
    r.schedule = ControlSchedule::expressions(std::move(es));
  }
  return r;
}

inline AnalysisSpec parse_analysis(const Json& j, const std::string& ptr, std::size_t m, std::size_t k) {
  expect_object(j, ptr);
  check_members(j, ptr,
                {"sample_times", "cone_time", "per_time_budget", "max_levels", "max_order", "control_grid",
                 "brackets", "covector", "decrease_direction", "variation", "mech_time", "tolerances",
                 "grid_max_check"});
  AnalysisSpec a;
  if (j.contains("sample_times")) a.sample_times = as_numbers(j["sample_times"], child(ptr, "sample_times"));
  if (j.contains("cone_time")) a.cone_time = as_number(j["cone_time"], child(ptr, "cone_time"));
  if (j.contains("mech_time")) a.mech_time = as_number(j["mech_time"], child(ptr, "mech_time"));
  if (j.contains("per_time_budget")) {
    const double v = as_number(j["per_time_budget"], child(ptr, "per_time_budget"));
    if (!(v >= 1.0)) throw SchemaError(child(ptr, "per_time_budget"), "must be at least 1");
    a.per_time_budget = static_cast<std::size_t>(v);
  }
  if (j.contains("max_levels")) {
    const double v = as_number(j["max_levels"], child(ptr, "max_levels"));
    if (!(v >= 0.0)) throw SchemaError(child(ptr, "max_levels"), "must be nonnegative");
    a.max_levels = static_cast<int>(v);
  }
  if (j.contains("max_order")) {
    const double v = as_number(j["max_order"], child(ptr, "max_order"));
    if (v != 1.0 && v != 2.0) throw SchemaError(child(ptr, "max_order"), "must be 1 or 2");
    a.max_order = static_cast<int>(v);
  }
  if (j.contains("control_grid")) a.control_grid = as_numbers(j["control_grid"], child(ptr, "control_grid"));
  if (j.contains("brackets")) a.brackets = as_strings(j["brackets"], child(ptr, "brackets"));
  if (j.contains("covector")) a.covector = as_numbers(j["covector"], child(ptr, "covector"));
  if (j.contains("decrease_direction")) {
    a.decrease_direction = as_numbers(j["decrease_direction"], child(ptr, "decrease_direction"));
    if (a.decrease_direction->size() != m)
      throw SchemaError(child(ptr, "decrease_direction"), "expected " + std::to_string(m) + " components");
  }
  if (j.contains("grid_max_check")) {
    if (!j["grid_max_check"].is_boolean()) throw SchemaError(child(ptr, "grid_max_check"), "expected a boolean");
    a.grid_max_check = j["grid_max_check"].get<bool>();
  }
  if (j.contains("variation")) {
    const std::string p = child(ptr, "variation");
    const Json& v = j["variation"];
    expect_object(v, p);
    check_members(v, p, {"time", "q1", "q2", "sequence", "s_max", "samples"});
    VariationSpec vs;
    if (v.contains("time")) vs.time = as_number(v["time"], child(p, "time"));
    if (v.contains("q1")) vs.q1 = as_string(v["q1"], child(p, "q1"));
    if (v.contains("q2")) vs.q2 = as_string(v["q2"], child(p, "q2"));
    if (v.contains("s_max")) vs.s_max = as_number(v["s_max"], child(p, "s_max"));
    if (v.contains("samples")) vs.samples = static_cast<int>(as_number(v["samples"], child(p, "samples")));
    if (!(vs.s_max > 0.0)) throw SchemaError(child(p, "s_max"), "must be positive");
    if (vs.samples < 2) throw SchemaError(child(p, "samples"), "must be at least 2");
    const std::string ps = child(p, "sequence");
    const Json& seq = require(v, p, "sequence");
    if (!seq.is_array()) throw SchemaError(ps, "expected an array of {control, tau} entries");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::string pi = child(ps, i);
      expect_object(seq[i], pi);
      check_members(seq[i], pi, {"control", "tau"});
      auto u = as_numbers(require(seq[i], pi, "control"), child(pi, "control"));
      if (u.size() != k) throw SchemaError(child(pi, "control"), "expected " + std::to_string(k) + " values");
      vs.controls.push_back(std::move(u));
      vs.tau.push_back(as_string(require(seq[i], pi, "tau"), child(pi, "tau")));
    }
    at_pointer(p, [&] { return EndTimeVariation::parse(vs.q1, vs.q2, vs.tau, vs.s_max); });
    a.variation = std::move(vs);
  }
  if (j.contains("tolerances")) {
    const std::string p = child(ptr, "tolerances");
    const Json& t = j["tolerances"];
    expect_object(t, p);
    check_members(t, p, {"jet_agreement", "order_eps", "stationarity", "normal_lift", "jet_s0"});
    if (t.contains("jet_agreement")) a.jets.agreement = as_number(t["jet_agreement"], child(p, "jet_agreement"));
    if (t.contains("order_eps")) a.jets.order_eps = as_number(t["order_eps"], child(p, "order_eps"));
    if (t.contains("jet_s0")) a.jets.s0 = as_number(t["jet_s0"], child(p, "jet_s0"));
    if (t.contains("stationarity")) a.stationarity_tol = as_number(t["stationarity"], child(p, "stationarity"));
    if (t.contains("normal_lift")) a.normal_lift.tolerance = as_number(t["normal_lift"], child(p, "normal_lift"));
  }
  return a;
}

}  // namespace detail

/// Validates and loads a scenario document; errors carry a JSON pointer.
inline Scenario parse_scenario(const Json& doc) {
  using namespace detail;
  const std::string root;
  expect_object(doc, root);
  check_members(doc, root, {"name", "chart", "controls", "system", "mechanics", "cost", "reference", "analysis"});
  const bool has_sys = doc.contains("system");
  const bool has_mech = doc.contains("mechanics");
  if (has_sys && has_mech) throw SchemaError(root, "exactly one of 'system' or 'mechanics' is allowed, found both");
  if (!has_sys && !has_mech) throw SchemaError(root, "one of 'system' or 'mechanics' is required");

  const std::string name = as_string(require(doc, root, "name"), "/name");
  auto chart = as_strings(require(doc, root, "chart"), "/chart");
  if (chart.empty()) throw SchemaError("/chart", "chart must name at least one coordinate");
  std::vector<std::string> controls;
  if (doc.contains("controls")) controls = as_strings(doc["controls"], "/controls");

  std::optional<MechanicsSpec> mech;
  std::optional<ControlAffineSystem> sys;
  if (has_sys) {
    const Json& s = doc["system"];
    expect_object(s, "/system");
    check_members(s, "/system", {"drift", "inputs", "control_box"});
    const std::size_t m = chart.size();
    VectorField drift = VectorField::zero(m);
    if (s.contains("drift")) drift = parse_field(s["drift"], "/system/drift", chart, m);
    std::vector<VectorField> inputs;
    if (s.contains("inputs")) inputs = parse_fields(s["inputs"], "/system/inputs", chart, m);
    if (controls.empty())
      for (std::size_t c = 0; c < inputs.size(); ++c) controls.push_back("u" + std::to_string(c + 1));
    if (controls.size() != inputs.size())
      throw SchemaError("/controls", "expected " + std::to_string(inputs.size()) + " control names");
    std::vector<Bounds> box;
    if (s.contains("control_box")) box = parse_box(s["control_box"], "/system/control_box", inputs.size());
    sys = at_pointer("/system", [&] { return ControlAffineSystem(chart, controls, drift, inputs, box); });
  } else {
    const Json& mj = doc["mechanics"];
    expect_object(mj, "/mechanics");
    check_members(mj, "/mechanics", {"velocities", "christoffel", "inputs", "control_box"});
    const auto vel = as_strings(require(mj, "/mechanics", "velocities"), "/mechanics/velocities");
    if (vel.size() != chart.size())
      throw SchemaError("/mechanics/velocities", "expected one velocity name per configuration coordinate");
    const std::size_t n = chart.size();
    std::vector<std::vector<std::vector<std::string>>> gamma;
    if (mj.contains("christoffel")) {
      const Json& g = mj["christoffel"];
      const std::string p = "/mechanics/christoffel";
      if (!g.is_array() || g.size() != n) throw SchemaError(p, "expected an n x n x n array");
      for (std::size_t i = 0; i < n; ++i) {
        if (!g[i].is_array() || g[i].size() != n) throw SchemaError(child(p, i), "expected an n x n array");
        std::vector<std::vector<std::string>> plane;
        for (std::size_t jj = 0; jj < n; ++jj) {
          auto row = as_strings(g[i][jj], child(child(p, i), jj));
          if (row.size() != n) throw SchemaError(child(child(p, i), jj), "expected n entries");
          plane.push_back(std::move(row));
        }
        gamma.push_back(std::move(plane));
      }
    } else {
      gamma.assign(n, std::vector<std::vector<std::string>>(n, std::vector<std::string>(n, "0")));
    }
    MechanicsSpec ms{at_pointer("/mechanics/christoffel", [&] { return ConnectionSpec::parse(chart, vel, gamma); }),
                     {}};
    if (mj.contains("inputs")) ms.inputs_on_q = parse_fields(mj["inputs"], "/mechanics/inputs", chart, n);
    if (controls.empty())
      for (std::size_t c = 0; c < ms.inputs_on_q.size(); ++c) controls.push_back("u" + std::to_string(c + 1));
    if (controls.size() != ms.inputs_on_q.size())
      throw SchemaError("/controls", "expected " + std::to_string(ms.inputs_on_q.size()) + " control names");
    std::vector<Bounds> box;
    if (mj.contains("control_box"))
      box = parse_box(mj["control_box"], "/mechanics/control_box", ms.inputs_on_q.size());
    sys = at_pointer("/mechanics",
                     [&] { return build_acc_system(ms.connection, ms.inputs_on_q, controls, box); });
    mech = std::move(ms);
    chart = sys->state_names();
  }

  Scenario sc{name, chart, controls, *sys, std::move(mech), std::nullopt, std::nullopt, {}, ""};
  if (doc.contains("cost")) {
    sc.cost = as_string(doc["cost"], "/cost");
    at_pointer("/cost", [&] { return ExtendedSystem::parse(sc.system, *sc.cost); });
  }
  if (doc.contains("reference")) sc.reference = parse_reference(doc["reference"], "/reference", sc.system.m(), sc.system.k());
  if (doc.contains("analysis")) sc.analysis = parse_analysis(doc["analysis"], "/analysis", sc.system.m(), sc.system.k());
  sc.digest = "fnv1a64:" + fnv1a_hex(doc.dump());
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

}  // namespace geocon
