#pragma once

// Forward-mode derivative carriers. Dual<T> nests: Dual<Dual<double>> carries
// second derivatives, and so on up to the order needed for jets.

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace geocon {

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // coefficient of the nilpotent unit

  constexpr Dual() = default;
  constexpr Dual(double x) : v(x), d(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T value, T deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }
};

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};

/// Underlying real value of a (possibly nested) scalar.
inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const Dual<T>& x) { return scalar_value(x.v); }

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& x) { return all_finite(x.v) && all_finite(x.d); }

using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> sin(const Dual<T>& a) { return {sin(a.v), a.d * cos(a.v)}; }
template <class T>
Dual<T> cos(const Dual<T>& a) { return {cos(a.v), -(a.d * sin(a.v))}; }
template <class T>
Dual<T> exp(const Dual<T>& a) {
  T e = exp(a.v);
  return {e, a.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& a) { return {log(a.v), a.d / a.v}; }
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  T r = sqrt(a.v);
  return {r, a.d / (T(2.0) * r)};
}

/// Integer power by repeated squaring; negative exponents invert.
template <class S>
S powi(const S& base, int n) {
  if (n == 0) return S(1.0);
  bool invert = n < 0;
  unsigned e = invert ? static_cast<unsigned>(-static_cast<long>(n)) : static_cast<unsigned>(n);
  S result(1.0);
  S b = base;
  bool first = true;
  while (e != 0) {
    if (e & 1u) {
      result = first ? b : result * b;
      first = false;
    }
    e >>= 1u;
    if (e != 0) b = b * b;
  }
  return invert ? S(1.0) / result : result;
}

// Taylor carriers: NestedDual<N> is Dual applied N times over double.
template <int N> struct nested_dual { using type = Dual<typename nested_dual<N - 1>::type>; };
template <> struct nested_dual<0> { using type = double; };
template <int N> using NestedDual = typename nested_dual<N>::type;

/// s + e1 + ... + eN. Evaluating f at this seed puts f^(k)(s) on every
/// component indexed by k distinct units.
template <int N>
NestedDual<N> taylor_seed(double s) {
  if constexpr (N == 0) {
    return s;
  } else {
    return NestedDual<N>(taylor_seed<N - 1>(s), NestedDual<N - 1>(1.0));
  }
}

/// k-th derivative carried by a value computed from taylor_seed<N>.
template <class T>
double taylor_coefficient(const T& x, int k) {
  if constexpr (std::is_same_v<T, double>) {
    return k == 0 ? x : 0.0;
  } else {
    return k == 0 ? scalar_value(x.v) : taylor_coefficient(x.d, k - 1);
  }
}

}  // namespace geocon
