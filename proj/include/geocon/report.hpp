#pragma once

// Deterministic JSON output: members in insertion order, floating-point
// numbers with 17 significant digits, non-finite values as null.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geocon/fields.hpp"

namespace geocon {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchemaVersion = "1.0";

inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_json(std::ostream& os, const Json& j, int indent = 2, int depth = 0) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << Json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << "\n" << close << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          write_json(os, j[i], indent, depth + 1);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        write_json(os, j[i], indent, depth + 1);
      }
      os << "\n" << close << "]";
      return;
    }
    case Json::value_t::number_float:
      os << format_number(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

inline std::string to_json_text(const Json& j) {
  std::ostringstream os;
  write_json(os, j);
  os << "\n";
  return os.str();
}

inline Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json strings(const std::vector<std::string>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

// ---------------------------------------------------------------------------
// Logging to stderr, controlled by GEOCON_LOG = quiet | warn | info | debug.

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
  const char* env = std::getenv("GEOCON_LOG");
  if (!env) return LogLevel::Warn;
  const std::string s(env);
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

inline void log(LogLevel level, const std::string& msg) {
  static const LogLevel current = log_level();
  if (level == LogLevel::Quiet || level > current) return;
  static const char* names[] = {"", "warn", "info", "debug"};
  std::cerr << "[geocon " << names[static_cast<int>(level)] << "] " << msg << "\n";
}

}  // namespace geocon
