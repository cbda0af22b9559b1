#pragma once

// Distribution functions for the t, normal and F laws, all built on the
// regularized incomplete beta function. Templated on the floating-point
// scalar; the library itself instantiates them with double.

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <string>

#include "tplmon/errors.hpp"

namespace tplmon {

/// Probability of a false alarm accepted by a test, strictly inside (0, 1).
class SignificanceLevel {
 public:
  explicit SignificanceLevel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ArgumentError("significance level must lie in (0, 1), got " +
                          std::to_string(alpha));
    }
  }
  double value() const noexcept { return alpha_; }
  friend bool operator==(SignificanceLevel, SignificanceLevel) = default;

 private:
  double alpha_;
};

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
template <std::floating_point T>
T beta_continued_fraction(T a, T b, T x) {
  constexpr T tiny = std::numeric_limits<T>::min() / std::numeric_limits<T>::epsilon();
  constexpr T eps = std::numeric_limits<T>::epsilon();
  constexpr int max_iter = 200000;

  const T qab = a + b;
  const T qap = a + T(1);
  const T qam = a - T(1);
  T c = T(1);
  T d = T(1) - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = T(1) / d;
  T h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const T m2 = T(2 * m);
    T aa = T(m) * (b - T(m)) * x / ((qam + m2) * (a + m2));
    d = T(1) + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = T(1) + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = T(1) / d;
    h *= d * c;
    aa = -(a + T(m)) * (qab + T(m)) * x / ((a + m2) * (qap + m2));
    d = T(1) + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = T(1) + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = T(1) / d;
    const T del = d * c;
    h *= del;
    if (std::abs(del - T(1)) <= eps) return h;
  }
  return h;
}

// I_x(a, b) given both x and y = 1 - x, so callers that know the complement
// exactly do not lose it to cancellation.
template <std::floating_point T>
T incomplete_beta(T a, T b, T x, T y) {
  if (x <= T(0)) return T(0);
  if (y <= T(0)) return T(1);
  const T log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(y);
  const T front = std::exp(log_front);
  if (x < (a + T(1)) / (a + b + T(2))) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return T(1) - front * beta_continued_fraction(b, a, y) / b;
}

// Finds the root of a nondecreasing cdf(q) - target on [lo, hi] by Newton
// steps safeguarded with bisection.
template <std::floating_point T, typename Cdf, typename Pdf>
T invert_monotone(Cdf&& cdf, Pdf&& pdf, T target, T lo, T hi, T guess) {
  T x = guess;
  if (!(x > lo && x < hi)) x = (lo + hi) / T(2);
  for (int iter = 0; iter < 400; ++iter) {
    const T f = cdf(x) - target;
    if (f == T(0)) return x;
    if (f < T(0)) {
      lo = x;
    } else {
      hi = x;
    }
    const T slope = pdf(x);
    T next = x - f / slope;
    if (!(slope > T(0)) || !(next > lo && next < hi)) next = lo + (hi - lo) / T(2);
    if (std::abs(next - x) <= T(4) * std::numeric_limits<T>::epsilon() * std::abs(x) ||
        hi - lo <= T(4) * std::numeric_limits<T>::epsilon() * std::abs(hi)) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
template <std::floating_point T>
T regularized_incomplete_beta(T a, T b, T x) {
  if (!(a > T(0)) || !(b > T(0))) {
    throw ArgumentError("incomplete beta requires a > 0 and b > 0");
  }
  if (!(x >= T(0) && x <= T(1))) {
    throw ArgumentError("incomplete beta requires 0 <= x <= 1");
  }
  return detail::incomplete_beta(a, b, x, T(1) - x);
}

template <std::floating_point T>
T normal_cdf(T z) {
  return T(0.5) * std::erfc(-z / std::numbers::sqrt2_v<T>);
}

template <std::floating_point T>
T normal_pdf(T z) {
  return std::exp(T(-0.5) * z * z) / std::sqrt(T(2) * std::numbers::pi_v<T>);
}

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// refined by Halley steps against the erfc-based CDF.
template <std::floating_point T>
T normal_quantile(T p) {
  if (!(p > T(0) && p < T(1))) {
    throw ArgumentError("normal quantile requires 0 < p < 1");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  const double pd = static_cast<double>(p);
  double x;
  if (pd < p_low) {
    const double q = std::sqrt(-2.0 * std::log(pd));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (pd <= 1.0 - p_low) {
    const double q = pd - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-pd));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  T z = static_cast<T>(x);
  for (int i = 0; i < 3; ++i) {
    // Work in the tail that keeps the residual well conditioned.
    const T e = z < T(0) ? normal_cdf(z) - p : (T(1) - p) - normal_cdf(-z);
    const T u = e / normal_pdf(z);
    z -= u / (T(1) + z * u / T(2));
  }
  return z;
}

template <std::floating_point T>
T t_pdf(T t, T dof) {
  const T log_norm = std::lgamma((dof + T(1)) / T(2)) - std::lgamma(dof / T(2)) -
                     T(0.5) * std::log(dof * std::numbers::pi_v<T>);
  return std::exp(log_norm - (dof + T(1)) / T(2) * std::log1p(t * t / dof));
}

/// Student's t cumulative distribution function.
template <std::floating_point T>
T t_cdf(T t, T dof) {
  if (!(dof > T(0))) throw ArgumentError("t distribution requires dof > 0");
  if (std::isinf(t)) return t > T(0) ? T(1) : T(0);
  const T t2 = t * t;
  const T x = dof / (dof + t2);
  const T y = t2 / (dof + t2);
  const T tail = T(0.5) * detail::incomplete_beta(dof / T(2), T(0.5), x, y);
  return t > T(0) ? T(1) - tail : tail;
}

/// Inverse of t_cdf in its first argument.
template <std::floating_point T>
T t_quantile(T p, T dof) {
  if (!(dof > T(0))) throw ArgumentError("t distribution requires dof > 0");
  if (!(p > T(0) && p < T(1))) throw ArgumentError("t quantile requires 0 < p < 1");
  if (p == T(0.5)) return T(0);
  if (p < T(0.5)) return -t_quantile(T(1) - p, dof);
  T hi = std::max(T(1), T(2) * normal_quantile(p));
  while (t_cdf(hi, dof) < p) hi *= T(2);
  return detail::invert_monotone<T>([dof](T q) { return t_cdf(q, dof); },
                                    [dof](T q) { return t_pdf(q, dof); }, p, T(0), hi,
                                    normal_quantile(p));
}

template <std::floating_point T>
T f_pdf(T x, T d1, T d2) {
  if (x <= T(0)) return T(0);
  const T log_b = std::lgamma(d1 / T(2)) + std::lgamma(d2 / T(2)) - std::lgamma((d1 + d2) / T(2));
  const T log_pdf = (d1 / T(2)) * std::log(d1 / d2) + (d1 / T(2) - T(1)) * std::log(x) -
                    ((d1 + d2) / T(2)) * std::log1p(d1 * x / d2) - log_b;
  return std::exp(log_pdf);
}

/// Fisher–Snedecor F cumulative distribution function.
template <std::floating_point T>
T f_cdf(T x, T d1, T d2) {
  if (!(d1 > T(0)) || !(d2 > T(0))) throw ArgumentError("F distribution requires positive dof");
  if (x <= T(0)) return T(0);
  if (std::isinf(x)) return T(1);
  const T den = d1 * x + d2;
  return detail::incomplete_beta(d1 / T(2), d2 / T(2), d1 * x / den, d2 / den);
}

/// Upper-tail critical value q with P(F_{d1,d2} > q) = alpha.
template <std::floating_point T = double>
T f_critical(SignificanceLevel alpha, int d1, int d2) {
  if (d1 < 1 || d2 < 1) {
    throw ArgumentError("F critical value requires integer dof >= 1");
  }
  const T fd1 = T(d1);
  const T fd2 = T(d2);
  const T target = T(1) - static_cast<T>(alpha.value());
  T hi = T(1);
  while (f_cdf(hi, fd1, fd2) < target) hi *= T(2);
  return detail::invert_monotone<T>([=](T q) { return f_cdf(q, fd1, fd2); },
                                    [=](T q) { return f_pdf(q, fd1, fd2); }, target, T(0),
                                    hi, hi / T(2));
}

}  // namespace tplmon
