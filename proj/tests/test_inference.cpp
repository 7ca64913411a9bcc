#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "higrad/errors.hpp"
#include "higrad/inference.hpp"
#include "higrad/rng.hpp"
#include "higrad/special_functions.hpp"
#include "higrad/tree.hpp"

using namespace higrad;

namespace {

TreeConfig random_config(RandomStream& rng) {
  const int depth = 1 + static_cast<int>(rng.uniform_index(3));
  std::vector<int> branching(depth);
  std::vector<long long> lengths(depth + 1);
  lengths[0] = 1 + static_cast<long long>(rng.uniform_index(20));
  for (int k = 0; k < depth; ++k) {
    branching[k] = 2 + static_cast<int>(rng.uniform_index(3));
    lengths[k + 1] = 1 + static_cast<long long>(rng.uniform_index(20));
  }
  long long total = lengths[0];
  long long prod = 1;
  for (int k = 0; k < depth; ++k) {
    prod *= branching[k];
    total += prod * lengths[k + 1];
  }
  return validate_config(depth, branching, lengths, total);
}

}  // namespace

TEST_CASE("thread estimates combine weighted path averages") {
  const TreeConfig config = validate_config(1, {2}, {3, 3}, 9);
  const WeightVector w = optimal_weights(config);  // 1/3, 2/3

  SegmentAverages averages;
  averages.config = config;
  averages.segments.resize(3);
  averages.segments[0].average = (Eigen::VectorXd(2) << 1.0, 2.0).finished();
  averages.segments[0].count = 3;
  averages.segments[1].average = (Eigen::VectorXd(2) << 3.0, 5.0).finished();
  averages.segments[1].count = 3;
  averages.segments[2].average = (Eigen::VectorXd(2) << -1.0, 0.0).finished();
  averages.segments[2].count = 3;

  const ThreadEstimates est = thread_estimates(averages, w);
  REQUIRE(est.theta.rows() == 2);
  REQUIRE(est.theta.cols() == 2);
  CHECK(est.theta(0, 0) == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
  CHECK(est.theta(0, 1) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(est.theta(1, 0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(est.theta(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("zero-weight levels are skipped even with empty segments") {
  const TreeConfig config = validate_config(1, {2}, {0, 3}, 6);
  const WeightVector w = optimal_weights(config);  // 0, 1

  SegmentAverages averages;
  averages.config = config;
  averages.segments.resize(3);
  averages.segments[0].count = 0;  // root ran zero updates; average left empty
  averages.segments[1].average = (Eigen::VectorXd(1) << 4.0).finished();
  averages.segments[1].count = 3;
  averages.segments[2].average = (Eigen::VectorXd(1) << 6.0).finished();
  averages.segments[2].count = 3;

  const ThreadEstimates est = thread_estimates(averages, w);
  CHECK(est.theta(0, 0) == 4.0);
  CHECK(est.theta(1, 0) == 6.0);

  // A positive weight on a missing segment average is an error.
  WeightVector bad;
  bad.values = {0.5, 0.5};
  CHECK_THROWS_AS(thread_estimates(averages, bad), MissingSegment);
  WeightVector short_w;
  short_w.values = {1.0};
  CHECK_THROWS_AS(thread_estimates(averages, short_w), LengthMismatch);
}

TEST_CASE("the plain mean matches the GLS estimate under Sigma") {
  // The all-ones vector is an eigenvector of the thread covariance, so the
  // generalized least squares estimate collapses to the sample mean. The GLS
  // route below is computed independently with Eigen's LDLT.
  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {1}));
  for (int trial = 0; trial < 50; ++trial) {
    const TreeConfig config = random_config(rng);
    const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));
    const long long T = config.thread_count;
    Eigen::VectorXd mu(T);
    for (long long t = 0; t < T; ++t) mu[t] = rng.normal();

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(T);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov.matrix);
    const Eigen::VectorXd si_mu = ldlt.solve(mu);
    const Eigen::VectorXd si_one = ldlt.solve(ones);
    const double gls = ones.dot(si_mu) / ones.dot(si_one);

    CHECK(std::abs(higrad_estimate(mu) - gls) < 1e-10);
  }
  CHECK_THROWS_AS(higrad_estimate(Eigen::VectorXd()), DomainError);
}

TEST_CASE("standard error on a worked two-thread example") {
  const TreeConfig config = validate_config(1, {2}, {3, 3}, 9);
  const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));
  // Sigma = [[5/3, 1/3], [1/3, 5/3]]; mu = (0, 1); quadratic form 3/8.
  const Eigen::VectorXd mu = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
  const double se = standard_error(mu, cov);
  CHECK(se == doctest::Approx(std::sqrt(3.0 / 8.0)).epsilon(1e-14));
}

TEST_CASE("standard error agrees with the plug-in variance route") {
  // Independent route: sigma2_hat = N dev' Sigma^{-1} dev / (T-1) and
  // se = sqrt(sigma2_hat / N) * sqrt(1' Sigma 1) / T, all solved with Eigen.
  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {2}));
  for (int trial = 0; trial < 50; ++trial) {
    const TreeConfig config = random_config(rng);
    const long long T = config.thread_count;
    if (T < 2) continue;
    const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));
    Eigen::VectorXd mu(T);
    for (long long t = 0; t < T; ++t) mu[t] = rng.normal();

    const double se = standard_error(mu, cov);

    const Eigen::VectorXd dev = mu.array() - mu.mean();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov.matrix);
    const double quad = dev.dot(ldlt.solve(dev));
    const double n_total = static_cast<double>(config.total);
    const double sigma2_hat = n_total * quad / static_cast<double>(T - 1);
    const double ref = std::sqrt(sigma2_hat / n_total) *
                       std::sqrt(cov.matrix.sum()) / static_cast<double>(T);
    CHECK(se == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("SPD solver matches Eigen and rejects bad matrices") {
  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {3}));
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(6));
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
    const Eigen::MatrixXd spd =
        m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = rng.normal();

    const SpdSolver solver(spd);
    const Eigen::VectorXd x = solver.solve(b);
    const Eigen::VectorXd ref = spd.ldlt().solve(b);
    CHECK((x - ref).norm() < 1e-9 * (1.0 + ref.norm()));
    CHECK((spd * x - b).norm() < 1e-9 * (1.0 + b.norm()));
  }

  Eigen::MatrixXd ill = Eigen::MatrixXd::Identity(2, 2);
  ill(1, 1) = 1e13;  // condition 1e13 > the 1e12 guard
  CHECK_THROWS_AS(SpdSolver{ill}, SingularSigma);

  Eigen::MatrixXd negative = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(SpdSolver{negative}, SingularSigma);

  Eigen::MatrixXd nan_mat = Eigen::MatrixXd::Identity(2, 2);
  nan_mat(0, 1) = std::nan("");
  CHECK_THROWS_AS(SpdSolver{nan_mat}, SingularSigma);
}

TEST_CASE("confidence and prediction intervals") {
  const double q = special::t_quantile(3, 0.95);
  CHECK(q == doctest::Approx(2.3533634348018264).epsilon(1e-8));

  const IntervalResult ci = confidence_interval(1.0, 0.5, 4, 0.1);
  CHECK(ci.kind == IntervalKind::confidence);
  CHECK(ci.center == 1.0);
  CHECK(ci.se == 0.5);
  CHECK(ci.level == doctest::Approx(0.9));
  CHECK(ci.lo == doctest::Approx(1.0 - q * 0.5).epsilon(1e-14));
  CHECK(ci.hi == doctest::Approx(1.0 + q * 0.5).epsilon(1e-14));
  CHECK_FALSE(ci.degenerate);

  const IntervalResult pi = prediction_interval(1.0, 0.5, 4, 0.1);
  CHECK(pi.kind == IntervalKind::prediction);
  CHECK((pi.hi - pi.lo) ==
        doctest::Approx(std::sqrt(2.0) * (ci.hi - ci.lo)).epsilon(1e-14));

  const IntervalResult flat = confidence_interval(2.0, 0.0, 4, 0.1);
  CHECK(flat.degenerate);
  CHECK(flat.lo == 2.0);
  CHECK(flat.hi == 2.0);

  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 1, 0.1), DomainError);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 4, 0.0), DomainError);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 4, 1.0), DomainError);
  CHECK_THROWS_AS(confidence_interval(0.0, -0.5, 4, 0.1), DomainError);
  CHECK_THROWS_AS(confidence_interval(0.0, std::nan(""), 4, 0.1), DomainError);
}

TEST_CASE("link transforms map interval endpoints") {
  const IntervalResult ci = confidence_interval(0.2, 0.1, 4, 0.1);
  const IntervalResult probs =
      link_transformed_interval(ci, [](double u) { return special::expit(u); }, 4);
  CHECK(probs.center == doctest::Approx(special::expit(0.2)).epsilon(1e-15));
  CHECK(probs.lo == doctest::Approx(special::expit(ci.lo)).epsilon(1e-15));
  CHECK(probs.hi == doctest::Approx(special::expit(ci.hi)).epsilon(1e-15));
  CHECK(probs.lo < probs.center);
  CHECK(probs.center < probs.hi);
  // The implied standard error is the transformed half width over the quantile.
  const double qt = special::t_quantile(3, 0.95);
  CHECK(probs.se == doctest::Approx((probs.hi - probs.lo) / (2.0 * qt)).epsilon(1e-12));

  // A decreasing transform swaps the endpoints.
  const IntervalResult negated =
      link_transformed_interval(ci, [](double u) { return -u; }, 4);
  CHECK(negated.lo == doctest::Approx(-ci.hi).epsilon(1e-15));
  CHECK(negated.hi == doctest::Approx(-ci.lo).epsilon(1e-15));

  // Non-monotone transforms are rejected.
  const IntervalResult wide = confidence_interval(0.0, 1.0, 4, 0.1);
  CHECK_THROWS_AS(
      link_transformed_interval(wide, [](double u) { return u * u; }, 4),
      NonMonotone);

  // Degenerate intervals pass through.
  const IntervalResult flat = confidence_interval(0.5, 0.0, 4, 0.1);
  const IntervalResult tflat =
      link_transformed_interval(flat, [](double u) { return special::expit(u); }, 4);
  CHECK(tflat.degenerate);
  CHECK(tflat.lo == tflat.hi);
}

TEST_CASE("functional values evaluate rows of the estimate matrix") {
  ThreadEstimates est;
  est.theta.resize(2, 3);
  est.theta << 1.0, 2.0, 3.0, -1.0, 0.0, 1.0;
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 1.0, 0.0, 2.0).finished();
  const Eigen::VectorXd vals = functional_values(est, linear_functional(x));
  CHECK(vals[0] == 7.0);
  CHECK(vals[1] == 1.0);
  const Eigen::VectorXd probs = functional_values(est, expit_functional(x));
  CHECK(probs[0] == doctest::Approx(special::expit(7.0)).epsilon(1e-15));
}

TEST_CASE("Hotelling region matches the hand-computed threshold") {
  // p = 2, T = 4, alpha = 0.1: threshold = 2*3/2 * F_{2,2}(0.9) = 3 * 9 = 27.
  const TreeConfig config = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));

  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {4}));
  Eigen::MatrixXd values(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) values(i, j) = rng.normal();

  const HotellingRegion region = hotelling_region(values, cov, 0.1, false);
  CHECK(region.threshold == doctest::Approx(27.0).epsilon(1e-10));
  CHECK_FALSE(region.prediction);
  CHECK(region.center == values.colwise().mean().transpose());
  CHECK(region.statistic(region.center) == doctest::Approx(0.0));
  CHECK(region.contains(region.center));

  // A point far outside the scatter is excluded.
  const Eigen::VectorXd far =
      region.center + Eigen::VectorXd::Constant(2, 1e6);
  CHECK_FALSE(region.contains(far));

  const HotellingRegion pred = hotelling_region(values, cov, 0.1, true);
  CHECK(pred.prediction);
  CHECK(pred.threshold == doctest::Approx(54.0).epsilon(1e-10));
  // Same quadratic form, doubled cutoff: the region strictly grows.
  CHECK(pred.statistic(far) == doctest::Approx(region.statistic(far)).epsilon(1e-12));
}

TEST_CASE("Hotelling guards its preconditions") {
  const TreeConfig config = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));
  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {5}));

  Eigen::MatrixXd collinear(4, 2);
  for (int i = 0; i < 4; ++i) {
    collinear(i, 0) = rng.normal();
    collinear(i, 1) = 2.0 * collinear(i, 0);  // rank-one scatter
  }
  CHECK_THROWS_AS(hotelling_region(collinear, cov, 0.1, false), RankDeficient);

  Eigen::MatrixXd too_wide(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) too_wide(i, j) = rng.normal();
  CHECK_THROWS_AS(hotelling_region(too_wide, cov, 0.1, false), DomainError);

  Eigen::MatrixXd wrong_rows(3, 2);
  wrong_rows.setRandom();
  CHECK_THROWS_AS(hotelling_region(wrong_rows, cov, 0.1, false),
                  DimensionMismatch);

  CHECK_THROWS_AS(hotelling_region(collinear, cov, 1.5, false), DomainError);
}

TEST_CASE("one-dimensional Hotelling membership equals the t interval") {
  RandomStream rng(derive_stream_key(2024, stream_tag::replicate, {6}));
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const TreeConfig config = random_config(rng);
    const long long T = config.thread_count;
    if (T < 3) continue;
    const ThreadCovariance cov = sigma_matrix(config, optimal_weights(config));
    Eigen::MatrixXd mu(T, 1);
    for (long long t = 0; t < T; ++t) mu(t, 0) = rng.normal();

    const double alpha = 0.05 + 0.9 * rng.uniform();
    const HotellingRegion region = hotelling_region(mu, cov, alpha, false);
    const double center = higrad_estimate(mu.col(0));
    const double se = standard_error(mu.col(0), cov);
    if (se == 0.0) continue;
    const double q = special::t_quantile(T - 1, 1.0 - alpha / 2.0);

    const double probe = center + (rng.uniform() * 6.0 - 3.0) * q * se;
    const Eigen::VectorXd point = Eigen::VectorXd::Constant(1, probe);
    const double stat = region.statistic(point);
    if (std::abs(stat - region.threshold) < 1e-9 * region.threshold) continue;
    const bool in_t = std::abs(probe - center) <= q * se;
    CHECK(region.contains(point) == in_t);
    ++checked;
  }
  CHECK(checked > 100);
}
