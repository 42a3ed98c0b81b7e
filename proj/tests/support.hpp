#pragma once

// Random instance generators and independent numerical oracles shared by the
// unit tests and the acceptance binary. Oracles here never call the library's
// integrator, bracket or jet code.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "geocon/expr.hpp"
#include "geocon/fields.hpp"
#include "geocon/system.hpp"

namespace geocon::oracle {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<std::string> chart(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back("x" + std::to_string(i + 1));
  return out;
}

/// Random polynomial of total degree <= max_degree with a few terms.
inline Expr random_polynomial(Rng& rng, std::size_t m, int max_degree, int terms = 3) {
  Expr acc = Expr::constant(std::round(uniform(rng, -1.0, 1.0) * 100.0) / 100.0);
  for (int t = 0; t < terms; ++t) {
    Expr mono = Expr::constant(std::round(uniform(rng, -1.0, 1.0) * 100.0) / 100.0);
    const int deg = uniform_int(rng, 1, max_degree);
    for (int d = 0; d < deg; ++d) {
      const int v = uniform_int(rng, 0, static_cast<int>(m) - 1);
      mono = mono * Expr::variable(v, "x" + std::to_string(v + 1));
    }
    acc = acc + mono;
  }
  return acc;
}

inline VectorField random_field(Rng& rng, std::size_t m, int max_degree = 3) {
  std::vector<Expr> comps;
  for (std::size_t i = 0; i < m; ++i) comps.push_back(random_polynomial(rng, m, max_degree));
  return VectorField(std::move(comps));
}

inline Point random_point(Rng& rng, std::size_t m, double r = 0.5) {
  Point x(m);
  for (auto& v : x) v = uniform(rng, -r, r);
  return x;
}

/// Random control-affine system with m <= 4, polynomial degree <= 3.
inline ControlAffineSystem random_system(Rng& rng, std::size_t m = 0, std::size_t k = 0, bool drift = true) {
  if (m == 0) m = static_cast<std::size_t>(uniform_int(rng, 2, 4));
  if (k == 0) k = static_cast<std::size_t>(uniform_int(rng, 1, 2));
  std::vector<VectorField> inputs;
  for (std::size_t c = 0; c < k; ++c) inputs.push_back(random_field(rng, m));
  return ControlAffineSystem(chart(m), {}, drift ? random_field(rng, m) : VectorField::zero(m), std::move(inputs), {});
}

// ---------------------------------------------------------------------------
// Oracles

/// Central-difference Jacobian J[i][j] = d f^i / d x^j.
inline std::vector<std::vector<double>> fd_jacobian(const std::function<std::vector<double>(const Point&)>& f,
                                                   const Point& x, double h = 1e-5) {
  const std::size_t m = x.size();
  const std::size_t n = f(x).size();
  std::vector<std::vector<double>> J(n, std::vector<double>(m));
  for (std::size_t j = 0; j < m; ++j) {
    Point xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const auto fp = f(xp);
    const auto fm = f(xm);
    for (std::size_t i = 0; i < n; ++i) J[i][j] = (fp[i] - fm[i]) / (2.0 * h);
  }
  return J;
}

/// [a, b] = Db a - Da b from finite-difference Jacobians of evaluated fields.
inline std::vector<double> fd_bracket(const VectorField& a, const VectorField& b, const Point& x) {
  auto fa = [&](const Point& p) { return a.eval<double>(p); };
  auto fb = [&](const Point& p) { return b.eval<double>(p); };
  const auto Ja = fd_jacobian(fa, x);
  const auto Jb = fd_jacobian(fb, x);
  const auto va = fa(x);
  const auto vb = fb(x);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += Jb[i][j] * va[j] - Ja[i][j] * vb[j];
  return out;
}

/// Independent fixed-step classical RK4 for an autonomous field, written
/// without the library integrator. Negative durations flow backwards.
inline Point reference_flow(const VectorField& f, double T, Point x, int steps = 2000) {
  if (T == 0.0) return x;
  const double h = T / steps;
  auto F = [&](const Point& p) { return f.eval<double>(p); };
  for (int s = 0; s < steps; ++s) {
    const auto k1 = F(x);
    Point y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + 0.5 * h * k1[i];
    const auto k2 = F(y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + 0.5 * h * k2[i];
    const auto k3 = F(y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + h * k3[i];
    const auto k4 = F(y);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return x;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Least-squares slope of log(r) against log(s).
inline double loglog_slope(const std::vector<double>& s, const std::vector<double>& r) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double lx = std::log(s[i]);
    const double ly = std::log(r[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Unit directions: 4000 points on the circle (m = 2) or a Fibonacci sphere
/// (m = 3); m = 1 gives {+1, -1}.
inline std::vector<std::vector<double>> direction_grid(std::size_t m, std::size_t count = 4000) {
  std::vector<std::vector<double>> out;
  const double pi = std::acos(-1.0);
  if (m == 1) return {{1.0}, {-1.0}};
  if (m == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      const double a = 2.0 * pi * static_cast<double>(i) / static_cast<double>(count);
      out.push_back({std::cos(a), std::sin(a)});
    }
    return out;
  }
  const double golden = pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    const double r = std::sqrt(1.0 - z * z);
    const double th = golden * static_cast<double>(i);
    out.push_back({r * std::cos(th), r * std::sin(th), z});
  }
  return out;
}

/// Brute-force dual-cone feasibility: some grid direction pairs nonpositively
/// with every (normalized) generator.
inline bool brute_force_supported(const std::vector<std::vector<double>>& gens, std::size_t m) {
  for (const auto& d : direction_grid(m)) {
    bool ok = true;
    for (const auto& g : gens) {
      double p = 0.0, n = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        p += d[i] * g[i];
        n += g[i] * g[i];
      }
      if (p / std::sqrt(n) > 0.0) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

}  // namespace geocon::oracle
