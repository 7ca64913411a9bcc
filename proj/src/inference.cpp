#include "higrad/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "higrad/errors.hpp"
#include "higrad/special_functions.hpp"

namespace higrad {

ThreadEstimates thread_estimates(const SegmentAverages& averages,
                                 const WeightVector& weights) {
  const TreeConfig& config = averages.config;
  if (static_cast<int>(weights.values.size()) != config.depth + 1) {
    throw LengthMismatch("expected " + std::to_string(config.depth + 1) +
                         " weights, got " + std::to_string(weights.values.size()));
  }
  if (static_cast<long long>(averages.segments.size()) != config.segment_count) {
    throw MissingSegment("run holds " + std::to_string(averages.segments.size()) +
                         " segments, tree has " +
                         std::to_string(config.segment_count));
  }
  int d = 0;
  for (const auto& segment : averages.segments) {
    if (segment.average.size() > 0) {
      d = static_cast<int>(segment.average.size());
      break;
    }
  }
  if (d == 0) throw MissingSegment("run holds no segment averages");

  const auto threads = enumerate_threads(config);
  ThreadEstimates estimates;
  estimates.theta = Eigen::MatrixXd::Zero(config.thread_count, d);
  for (long long t = 0; t < config.thread_count; ++t) {
    const ThreadPath& path = threads[t];
    for (int k = 0; k <= config.depth; ++k) {
      const double w = weights.values[k];
      if (w == 0.0) continue;
      const long long id =
          config.segment_id(std::span<const int>(path.data(), k));
      const SegmentStats& segment = averages.segments[id];
      if (segment.count <= 0) {
        throw MissingSegment("segment " + std::to_string(id) +
                             " has no averaged iterates but weight " +
                             std::to_string(w));
      }
      if (segment.average.size() != d) {
        throw DimensionMismatch("segment " + std::to_string(id) +
                                " average has size " +
                                std::to_string(segment.average.size()) +
                                ", expected " + std::to_string(d));
      }
      estimates.theta.row(t) += w * segment.average.transpose();
    }
  }
  return estimates;
}

Functional linear_functional(Eigen::VectorXd x) {
  return [x = std::move(x)](const Eigen::VectorXd& theta) {
    if (theta.size() != x.size()) {
      throw DimensionMismatch("functional over dimension " +
                              std::to_string(x.size()) + " applied to theta of size " +
                              std::to_string(theta.size()));
    }
    return x.dot(theta);
  };
}

Functional expit_functional(Eigen::VectorXd x) {
  auto linear = linear_functional(std::move(x));
  return [linear = std::move(linear)](const Eigen::VectorXd& theta) {
    return special::expit(linear(theta));
  };
}

Eigen::VectorXd functional_values(const ThreadEstimates& estimates,
                                  const Functional& f) {
  const long long T = estimates.theta.rows();
  Eigen::VectorXd mu(T);
  for (long long t = 0; t < T; ++t) {
    mu[t] = f(estimates.theta.row(t).transpose());
  }
  return mu;
}

double higrad_estimate(const Eigen::VectorXd& mu) {
  if (mu.size() < 1) throw DomainError("no thread values to average");
  return mu.mean();
}

SpdSolver::SpdSolver(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols()) {
    throw DimensionMismatch("matrix is " + std::to_string(matrix.rows()) + "x" +
                            std::to_string(matrix.cols()));
  }
  const int n = static_cast<int>(matrix.rows());
  if (n < 1) throw DimensionMismatch("empty matrix");
  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());

  // Exact spectral condition check before factoring.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(sym,
                                                          Eigen::EigenvaluesOnly);
  const double lo = spectrum.eigenvalues().minCoeff();
  const double hi = spectrum.eigenvalues().maxCoeff();
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo > 0.0)) {
    throw SingularSigma("matrix is not positive definite (min eigenvalue " +
                        std::to_string(lo) + ")");
  }
  condition_ = hi / lo;
  if (condition_ > 1e12) {
    throw SingularSigma("condition number " + std::to_string(condition_) +
                        " exceeds 1e12");
  }

  // Lower Cholesky factor, in place.
  chol_ = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double diag = sym(j, j);
    for (int k = 0; k < j; ++k) diag -= chol_(j, k) * chol_(j, k);
    if (!(diag > 0.0)) {
      throw SingularSigma("Cholesky pivot " + std::to_string(j) +
                          " is not positive");
    }
    chol_(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < n; ++i) {
      double value = sym(i, j);
      for (int k = 0; k < j; ++k) value -= chol_(i, k) * chol_(j, k);
      chol_(i, j) = value / chol_(j, j);
    }
  }
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& rhs) const {
  const int n = static_cast<int>(chol_.rows());
  if (rhs.size() != n) {
    throw DimensionMismatch("rhs of size " + std::to_string(rhs.size()) +
                            " for a system of size " + std::to_string(n));
  }
  Eigen::VectorXd z(n);
  // Forward substitution L z = rhs.
  for (int i = 0; i < n; ++i) {
    double value = rhs[i];
    for (int k = 0; k < i; ++k) value -= chol_(i, k) * z[k];
    z[i] = value / chol_(i, i);
  }
  // Backward substitution L' x = z.
  Eigen::VectorXd x(n);
  for (int i = n - 1; i >= 0; --i) {
    double value = z[i];
    for (int k = i + 1; k < n; ++k) value -= chol_(k, i) * x[k];
    x[i] = value / chol_(i, i);
  }
  return x;
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) {
    out.col(c) = solve(Eigen::VectorXd(rhs.col(c)));
  }
  return out;
}

double standard_error(const Eigen::VectorXd& mu, const ThreadCovariance& sigma) {
  const long long T = sigma.config.thread_count;
  if (mu.size() != T) {
    throw DimensionMismatch("mu of size " + std::to_string(mu.size()) +
                            " for " + std::to_string(T) + " threads");
  }
  if (T < 2) {
    throw DomainError("standard error needs at least 2 threads, got " +
                      std::to_string(T));
  }
  const double mubar = mu.mean();
  const Eigen::VectorXd dev = mu.array() - mubar;
  const SpdSolver solver(sigma.matrix);
  // Roundoff can push the quadratic form a hair below zero when mu is
  // (numerically) constant; clamp rather than take sqrt of a negative.
  const double quad = std::max(0.0, dev.dot(solver.solve(dev)));
  const double ones_quad = sigma.matrix.sum();
  const double T_d = static_cast<double>(T);
  return std::sqrt(ones_quad * quad / (T_d * T_d * (T_d - 1.0)));
}

namespace {

void check_interval_inputs(double center, double se, long long num_threads,
                           double alpha) {
  if (num_threads < 2) {
    throw DomainError("interval needs at least 2 threads, got " +
                      std::to_string(num_threads));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha = " + std::to_string(alpha) + " outside (0, 1)");
  }
  if (!std::isfinite(center) || !std::isfinite(se) || se < 0.0) {
    throw DomainError("bad interval inputs center=" + std::to_string(center) +
                      " se=" + std::to_string(se));
  }
}

}  // namespace

IntervalResult confidence_interval(double center, double se,
                                   long long num_threads, double alpha) {
  check_interval_inputs(center, se, num_threads, alpha);
  const double q =
      special::t_quantile(static_cast<double>(num_threads - 1), 1.0 - alpha / 2.0);
  IntervalResult result;
  result.center = center;
  result.se = se;
  result.lo = center - q * se;
  result.hi = center + q * se;
  result.level = 1.0 - alpha;
  result.kind = IntervalKind::confidence;
  result.degenerate = (se == 0.0);
  return result;
}

IntervalResult prediction_interval(double center, double se,
                                   long long num_threads, double alpha) {
  check_interval_inputs(center, se, num_threads, alpha);
  const double widened = std::sqrt(2.0) * se;
  const double q =
      special::t_quantile(static_cast<double>(num_threads - 1), 1.0 - alpha / 2.0);
  IntervalResult result;
  result.center = center;
  result.se = se;
  result.lo = center - q * widened;
  result.hi = center + q * widened;
  result.level = 1.0 - alpha;
  result.kind = IntervalKind::prediction;
  result.degenerate = (se == 0.0);
  return result;
}

IntervalResult link_transformed_interval(const IntervalResult& interval,
                                         const std::function<double(double)>& g,
                                         long long num_threads) {
  const double g_lo = g(interval.lo);
  const double g_center = g(interval.center);
  const double g_hi = g(interval.hi);
  IntervalResult out = interval;
  out.center = g_center;
  if (interval.degenerate) {
    out.lo = out.hi = g_center;
    out.se = 0.0;
    return out;
  }
  if (g_lo < g_center && g_center < g_hi) {
    out.lo = g_lo;
    out.hi = g_hi;
  } else if (g_lo > g_center && g_center > g_hi) {
    out.lo = g_hi;
    out.hi = g_lo;
  } else {
    throw NonMonotone("transform is not strictly monotone across the interval");
  }
  // Summary scale only: the half-width expressed in the same units the
  // untransformed se would have, so kind-specific reconstruction still holds.
  const double q = special::t_quantile(static_cast<double>(num_threads - 1),
                                       0.5 + 0.5 * interval.level);
  const double widen =
      interval.kind == IntervalKind::prediction ? std::sqrt(2.0) : 1.0;
  out.se = 0.5 * (out.hi - out.lo) / (q * widen);
  return out;
}

double HotellingRegion::statistic(const Eigen::VectorXd& mu) const {
  if (mu.size() != center.size()) {
    throw DimensionMismatch("point of size " + std::to_string(mu.size()) +
                            " in a region of dimension " +
                            std::to_string(center.size()));
  }
  const Eigen::VectorXd dev = center - mu;
  // dev' S^{-1} dev through the stored factor: solve L z = dev, take |z|^2.
  const int p = static_cast<int>(dev.size());
  Eigen::VectorXd z(p);
  for (int i = 0; i < p; ++i) {
    double value = dev[i];
    for (int k = 0; k < i; ++k) value -= scatter_chol(i, k) * z[k];
    z[i] = value / scatter_chol(i, i);
  }
  return scale * z.squaredNorm();
}

bool HotellingRegion::contains(const Eigen::VectorXd& mu) const {
  return statistic(mu) <= threshold;
}

HotellingRegion hotelling_region(const Eigen::MatrixXd& thread_values,
                                 const ThreadCovariance& sigma, double alpha,
                                 bool prediction) {
  const long long T = sigma.config.thread_count;
  const long long p = thread_values.cols();
  if (thread_values.rows() != T) {
    throw DimensionMismatch("value matrix has " +
                            std::to_string(thread_values.rows()) +
                            " rows for " + std::to_string(T) + " threads");
  }
  if (p < 1) throw BadDimension("region needs at least one coordinate");
  if (T <= p) {
    throw DomainError("Hotelling region needs more threads than dimensions: T=" +
                      std::to_string(T) + " p=" + std::to_string(p));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha = " + std::to_string(alpha) + " outside (0, 1)");
  }

  HotellingRegion region;
  region.center = thread_values.colwise().mean();
  const Eigen::MatrixXd centered =
      thread_values.rowwise() - region.center.transpose();
  const SpdSolver sigma_solver(sigma.matrix);
  region.scatter = centered.transpose() * sigma_solver.solve(centered) /
                   static_cast<double>(T - 1);
  // Symmetrize before factoring; the product above is symmetric only up to
  // roundoff.
  region.scatter = ((region.scatter + region.scatter.transpose()) / 2.0).eval();
  try {
    const SpdSolver scatter_solver(region.scatter);
    region.scatter_chol = scatter_solver.factor();
  } catch (const SingularSigma& err) {
    throw RankDeficient("thread values do not span the region dimensions: " +
                        std::string(err.what()));
  }

  // (1' Sigma^{-1/2} 1)^2 / T: the ones vector is an eigenvector of Sigma, so
  // this is T / lambda with lambda its eigenvalue.
  const double lambda = sigma.ones_eigenvalue();
  if (!(lambda > 0.0)) {
    throw SingularSigma("ones eigenvalue of Sigma is " + std::to_string(lambda));
  }
  region.scale = static_cast<double>(T) / lambda;

  const double T_d = static_cast<double>(T);
  const double p_d = static_cast<double>(p);
  region.threshold = p_d * (T_d - 1.0) / (T_d - p_d) *
                     special::f_quantile(p_d, T_d - p_d, 1.0 - alpha);
  if (prediction) region.threshold *= 2.0;
  region.prediction = prediction;
  region.level = 1.0 - alpha;
  return region;
}

}  // namespace higrad
