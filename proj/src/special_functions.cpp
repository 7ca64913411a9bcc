#include "higrad/special_functions.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "higrad/errors.hpp"

namespace higrad::special {

namespace {

// Continued-fraction part of the incomplete beta function (modified Lentz).
// Valid and fast for x < (a + 1) / (a + b + 2); callers use the symmetry
// I_x(a,b) = 1 - I_{1-x}(b,a) to reach that regime.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEps = 3e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NonMonotone("incomplete beta continued fraction failed to converge for a=" +
                    std::to_string(a) + " b=" + std::to_string(b) + " x=" +
                    std::to_string(x));
}

// Inverts an increasing CDF by bisection on [lo, hi], assuming
// cdf(lo) < p < cdf(hi).
double bisect_quantile(const std::function<double(double)>& cdf, double p,
                       double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval exhausted in doubles
    const double value = cdf(mid);
    if (std::abs(value - p) < 1e-12 && it > 20) return mid;
    if (value < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("incomplete beta needs a, b > 0, got a=" +
                      std::to_string(a) + " b=" + std::to_string(b));
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("incomplete beta needs x in [0, 1], got x=" +
                      std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double t_cdf(double df, double t) {
  if (!(df > 0.0)) {
    throw DomainError("t distribution needs df > 0, got " + std::to_string(df));
  }
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double t_quantile(double df, double p) {
  if (!(df >= 1.0)) {
    throw DomainError("t quantile needs df >= 1, got " + std::to_string(df));
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("t quantile needs p in (0, 1), got " + std::to_string(p));
  }
  if (p == 0.5) return 0.0;
  // By symmetry, invert the upper half only.
  if (p < 0.5) return -t_quantile(df, 1.0 - p);
  double hi = 1.0;
  while (t_cdf(df, hi) < p) {
    hi *= 2.0;
    if (hi > 1e308) throw NonMonotone("t quantile bracket diverged");
  }
  return bisect_quantile([df](double t) { return t_cdf(df, t); }, p, 0.0, hi);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal quantile needs p in (0, 1), got " +
                      std::to_string(p));
  }
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -normal_quantile(1.0 - p);
  return bisect_quantile(normal_cdf, p, 0.0, 40.0);
}

double f_cdf(double d1, double d2, double x) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) {
    throw DomainError("F distribution needs d1, d2 > 0, got d1=" +
                      std::to_string(d1) + " d2=" + std::to_string(d2));
  }
  if (x <= 0.0) return 0.0;
  return reg_incomplete_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

double f_quantile(double d1, double d2, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("F quantile needs p in (0, 1), got " + std::to_string(p));
  }
  double hi = 1.0;
  while (f_cdf(d1, d2, hi) < p) {
    hi *= 2.0;
    if (hi > 1e308) throw NonMonotone("F quantile bracket diverged");
  }
  return bisect_quantile(
      [d1, d2](double x) { return f_cdf(d1, d2, x); }, p, 0.0, hi);
}

double expit(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("logit needs p in (0, 1), got " + std::to_string(p));
  }
  return std::log(p / (1.0 - p));
}

}  // namespace higrad::special
