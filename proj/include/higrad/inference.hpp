#pragma once

// From segment averages to interval statements.
//
// Thread t's estimate is the weighted sum of the averages along its
// root-to-leaf path.  The T estimates are asymptotically jointly normal with
// a known correlation structure Sigma (see tree.hpp), so the scalar
// functionals mu_1..mu_T of the threads admit an exact-variance pivot:
//
//   se = sqrt( 1'Sigma 1 * (mu - mubar 1)' Sigma^{-1} (mu - mubar 1)
//              / (T^2 (T - 1)) ),
//
// and (mubar - truth)/se is asymptotically t with T-1 degrees of freedom.
// Prediction intervals for a fresh, independent run widen the interval by
// sqrt(2); multivariate regions replace the t pivot with Hotelling's T^2.

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "higrad/sgd.hpp"
#include "higrad/tree.hpp"

namespace higrad {

// T x d matrix of per-thread parameter estimates; rows follow
// enumerate_threads order.
struct ThreadEstimates {
  Eigen::MatrixXd theta;
};

// Combines segment averages into per-thread estimates with the given
// weights.  Levels with w_k = 0 are skipped, so zero-length segments (n_0=0
// trees) never contribute.  Throws LengthMismatch on a weight vector of the
// wrong length and MissingSegment when the averages do not cover the tree.
ThreadEstimates thread_estimates(const SegmentAverages& averages,
                                 const WeightVector& weights);

// Scalar functionals of a parameter vector, applied per thread.
using Functional = std::function<double(const Eigen::VectorXd&)>;
Functional linear_functional(Eigen::VectorXd x);  // theta -> x'theta
Functional expit_functional(Eigen::VectorXd x);   // theta -> expit(x'theta)

// mu_t = f(theta_t) for every thread.
Eigen::VectorXd functional_values(const ThreadEstimates& estimates,
                                  const Functional& f);

// The overall point estimate: the plain mean of mu_1..mu_T.  Because the
// all-ones vector is an eigenvector of Sigma, this mean coincides with the
// generalized least-squares estimate under the Sigma structure.
double higrad_estimate(const Eigen::VectorXd& mu);

// Symmetric positive-definite solver used for all Sigma^{-1} products: a
// Cholesky factorization guarded by the exact spectral condition number,
// throwing SingularSigma beyond 1e12 (and for non-finite or non-positive
// spectra).
class SpdSolver {
 public:
  explicit SpdSolver(const Eigen::MatrixXd& matrix);
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  double condition() const { return condition_; }
  const Eigen::MatrixXd& factor() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;  // lower-triangular factor
  double condition_ = 0.0;
};

// The standard error above.  Requires T >= 2 (DomainError) and mu of length
// T (DimensionMismatch).
double standard_error(const Eigen::VectorXd& mu, const ThreadCovariance& sigma);

enum class IntervalKind { confidence, prediction };

struct IntervalResult {
  double center = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;          // 1 - alpha
  IntervalKind kind = IntervalKind::confidence;
  // Set when se is exactly zero: the interval collapses to a point, which is
  // a legitimate (if suspicious) outcome rather than an error.
  bool degenerate = false;
};

// center +- t_{T-1, 1-alpha/2} * se.  Throws DomainError for T < 2 or alpha
// outside (0, 1), and for a negative or non-finite se.
IntervalResult confidence_interval(double center, double se, long long num_threads,
                                   double alpha);

// The same interval widened by sqrt(2): it covers, with the stated
// probability, the point estimate an independent fresh run of the same
// procedure would produce.
IntervalResult prediction_interval(double center, double se, long long num_threads,
                                   double alpha);

// Maps an interval through a strictly monotone transform g (e.g. expit, to
// carry a logit-scale interval to the probability scale).  Endpoints are
// g(lo), g(hi) reordered if g decreases; the center is g(center); se is the
// transformed half-width divided by the original t quantile, kept only as a
// summary.  Throws NonMonotone if g(lo), g(center), g(hi) are not strictly
// ordered.
IntervalResult link_transformed_interval(const IntervalResult& interval,
                                         const std::function<double(double)>& g,
                                         long long num_threads);

// Hotelling-type region for a p-dimensional functional of the parameters.
// Built from the T x p matrix M of per-thread functional values:
//
//   center   column means mubar,
//   scatter  S = (M - 1 mubar')' Sigma^{-1} (M - 1 mubar') / (T - 1),
//   scale    (1' Sigma^{-1/2} 1)^2 / T, which equals T / lambda with lambda
//            the eigenvalue of Sigma on the all-ones vector,
//   statistic(mu) = scale * (mubar - mu)' S^{-1} (mubar - mu),
//   threshold p (T-1) / (T-p) * F_{p, T-p, 1-alpha},
//
// and mu belongs to the region iff statistic(mu) <= threshold.  A prediction
// region for an independent fresh run doubles the threshold.  Requires
// T > p (DomainError) and a full-rank scatter (RankDeficient).
struct HotellingRegion {
  Eigen::VectorXd center;
  Eigen::MatrixXd scatter;
  double scale = 0.0;
  double threshold = 0.0;
  double level = 0.0;
  bool prediction = false;

  double statistic(const Eigen::VectorXd& mu) const;
  bool contains(const Eigen::VectorXd& mu) const;

  // Internal: factorization of scatter, set at construction.
  Eigen::MatrixXd scatter_chol;
};

HotellingRegion hotelling_region(const Eigen::MatrixXd& thread_values,
                                 const ThreadCovariance& sigma, double alpha,
                                 bool prediction = false);

}  // namespace higrad
