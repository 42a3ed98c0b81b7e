#pragma once

// Dense tableau simplex for  max c.x  s.t.  A x <= b, x >= 0  with b >= 0,
// so the slack basis is feasible from the start. Bland's rule for entering
// and leaving variables keeps degenerate instances from cycling.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "geocon/errors.hpp"

namespace geocon::lp {

enum class Status { Optimal, Unbounded };

struct Result {
  Status status = Status::Optimal;
  double value = 0.0;
  std::vector<double> x;
};

inline Result maximize(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                       const std::vector<double>& b, double eps = 1e-12) {
  const std::size_t n = c.size();
  const std::size_t rows = A.size();
  if (b.size() != rows) throw DimensionError("lp: right-hand side size differs from row count");
  const std::size_t cols = n + rows + 1;  // structural, slack, rhs
  std::vector<std::vector<double>> T(rows + 1, std::vector<double>(cols, 0.0));
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (A[i].size() != n) throw DimensionError("lp: ragged constraint matrix");
    if (b[i] < 0.0) throw InvalidArgument("lp: right-hand side must be nonnegative");
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = 1.0;
    T[i][cols - 1] = b[i];
    basis[i] = n + i;
  }
  auto& obj = T[rows];
  for (std::size_t j = 0; j < n; ++j) obj[j] = -c[j];

  for (std::size_t iter = 0; iter < 100000; ++iter) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j + 1 < cols; ++j)
      if (obj[j] < -eps) {
        enter = j;
        break;
      }
    if (enter == cols) break;

    std::size_t leave = rows;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i) {
      const double a = T[i][enter];
      if (a <= eps) continue;
      const double ratio = T[i][cols - 1] / a;
      if (ratio < best - eps || (std::fabs(ratio - best) <= eps && leave < rows && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave == rows) return {Status::Unbounded, std::numeric_limits<double>::infinity(), {}};

    const double piv = T[leave][enter];
    for (auto& v : T[leave]) v /= piv;
    for (std::size_t i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const double f = T[i][enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[leave][j];
    }
    basis[leave] = enter;
  }

  Result r;
  r.x.assign(n, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    if (basis[i] < n) r.x[basis[i]] = T[i][cols - 1];
  r.value = obj[cols - 1];
  return r;
}

}  // namespace geocon::lp
