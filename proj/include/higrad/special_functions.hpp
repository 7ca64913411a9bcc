#pragma once

// Distribution functions and quantiles needed for t- and F-based intervals.
//
// Everything is built on the regularized incomplete beta function, evaluated
// with the modified Lentz continued fraction.  Quantiles invert the CDFs by
// bracketed bisection to ~1e-12 on the probability scale: slower than a
// rational approximation but exact enough to freeze expected values in tests,
// and none of these sit in a hot loop.

namespace higrad::special {

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
// Throws DomainError outside that range, NonMonotone if the continued
// fraction fails to converge.
double reg_incomplete_beta(double a, double b, double x);

// Student-t CDF with df > 0 degrees of freedom.
double t_cdf(double df, double t);

// Student-t quantile: the t with t_cdf(df, t) = p.  Requires df >= 1 and
// p in (0, 1); throws DomainError otherwise.
double t_quantile(double df, double p);

// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double p);

// F distribution with (d1, d2) degrees of freedom, both > 0.
double f_cdf(double d1, double d2, double x);
double f_quantile(double d1, double d2, double p);

// Logistic link and its inverse: expit(u) = 1 / (1 + exp(-u)), evaluated in
// a branch that never overflows.  logit requires p in (0, 1).
double expit(double u);
double logit(double p);

}  // namespace higrad::special
