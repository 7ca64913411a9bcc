#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "higrad/errors.hpp"
#include "higrad/rng.hpp"
#include "higrad/tree.hpp"

using namespace higrad;

namespace {

// Draws a valid random configuration with K <= 3, B_k in {2,3,4}, small
// segment lengths, and n_0 >= 1.
TreeConfig random_config(RandomStream& rng) {
  const int depth = 1 + static_cast<int>(rng.uniform_index(3));
  std::vector<int> branching(depth);
  for (int k = 0; k < depth; ++k) {
    branching[k] = 2 + static_cast<int>(rng.uniform_index(3));
  }
  std::vector<long long> lengths(depth + 1);
  lengths[0] = 1 + static_cast<long long>(rng.uniform_index(30));
  for (int k = 1; k <= depth; ++k) {
    lengths[k] = 1 + static_cast<long long>(rng.uniform_index(30));
  }
  long long total = 0;
  long long count = 1;
  for (int k = 0; k <= depth; ++k) {
    if (k > 0) count *= branching[k - 1];
    total += count * lengths[k];
  }
  return validate_config(depth, branching, lengths, total);
}

}  // namespace

TEST_CASE("validate_config fills derived fields") {
  const TreeConfig c = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  CHECK(c.thread_count == 4);
  CHECK(c.segment_count == 7);
  CHECK(c.cumulative_lengths == std::vector<long long>{1, 2, 3});
  CHECK(c.level_counts == std::vector<long long>{1, 2, 4});
  CHECK(c.level_offsets == std::vector<long long>{0, 1, 3});
  CHECK(thread_length(c) == 3);
}

TEST_CASE("validate_config rejects bad shapes") {
  CHECK_THROWS_AS(validate_config(1, {1}, {1, 1}, 2), BadBranching);
  CHECK_THROWS_AS(validate_config(1, {2, 2}, {1, 1}, 3), LengthMismatch);
  CHECK_THROWS_AS(validate_config(1, {2}, {1}, 3), LengthMismatch);
  CHECK_THROWS_AS(validate_config(1, {2}, {-1, 2}, 3), BadLength);
  CHECK_THROWS_AS(validate_config(1, {2}, {1, 0}, 1), BadLength);
  CHECK_THROWS_AS(validate_config(2, {2, 2}, {1, 1, 1}, 8), ConstraintViolation);
  CHECK_THROWS_AS(validate_config(-1, {}, {}, 0), BadLength);
}

TEST_CASE("segment ids round-trip and follow level-major order") {
  const TreeConfig c = validate_config(3, {2, 3, 2}, {2, 1, 1, 1}, 2 + 2 + 6 + 12);
  CHECK(c.segment_count == 1 + 2 + 6 + 12);
  // Root is id 0; first-level children follow.
  CHECK(c.segment_id(std::vector<int>{}) == 0);
  CHECK(c.segment_id(std::vector<int>{1}) == 1);
  CHECK(c.segment_id(std::vector<int>{2}) == 2);
  CHECK(c.segment_id(std::vector<int>{1, 1}) == 3);
  CHECK(c.segment_id(std::vector<int>{2, 3}) == 8);
  for (long long id = 0; id < c.segment_count; ++id) {
    const ThreadPath path = c.segment_path(id);
    CHECK(c.segment_id(path) == id);
    CHECK(c.segment_level(id) == static_cast<int>(path.size()));
  }
  CHECK_THROWS_AS(c.segment_id(std::vector<int>{3}), BadBranching);
  CHECK_THROWS_AS(c.segment_id(std::vector<int>{1, 1, 1, 1}), LengthMismatch);
}

TEST_CASE("enumerate_threads is lexicographic") {
  const TreeConfig c = validate_config(2, {2, 3}, {1, 1, 1}, 1 + 2 + 6);
  const auto threads = enumerate_threads(c);
  REQUIRE(threads.size() == 6);
  CHECK(threads[0] == ThreadPath{1, 1});
  CHECK(threads[1] == ThreadPath{1, 2});
  CHECK(threads[2] == ThreadPath{1, 3});
  CHECK(threads[3] == ThreadPath{2, 1});
  CHECK(threads[5] == ThreadPath{2, 3});
}

TEST_CASE("shared_depth counts the common prefix") {
  CHECK(shared_depth({1, 1}, {1, 2}) == 1);
  CHECK(shared_depth({1, 1}, {1, 1}) == 2);
  CHECK(shared_depth({2, 1}, {1, 1}) == 0);
  CHECK(shared_depth({}, {}) == 0);
  CHECK_THROWS_AS(shared_depth({1}, {1, 2}), LengthMismatch);
}

TEST_CASE("optimal weights match the closed form") {
  const TreeConfig c = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  const WeightVector w = optimal_weights(c);
  REQUIRE(w.values.size() == 3);
  CHECK(w.values[0] == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(w.values[1] == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
  CHECK(w.values[2] == doctest::Approx(4.0 / 7.0).epsilon(1e-15));

  const TreeConfig c2 = validate_config(1, {4}, {20, 20}, 100);
  const WeightVector w2 = optimal_weights(c2);
  CHECK(w2.values[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(w2.values[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("optimal weights handle a zero-length root without renormalizing") {
  const TreeConfig c = validate_config(1, {4}, {0, 25}, 100);
  const WeightVector w = optimal_weights(c);
  CHECK(w.values[0] == 0.0);
  CHECK(w.values[1] == 1.0);
  double sum = 0.0;
  for (double v : w.values) sum += v;
  CHECK(sum == 1.0);
  // Sigma exists and is diagonal: threads share nothing.
  const ThreadCovariance cov = sigma_matrix(c, w);
  CHECK(cov.matrix(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(cov.matrix(0, 1) == 0.0);
  CHECK(cov.matrix.sum() == doctest::Approx(16.0).epsilon(1e-12));
}

TEST_CASE("explicit weights are validated") {
  const TreeConfig c = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  CHECK_NOTHROW(make_weights(c, {0.2, 0.3, 0.5}));
  CHECK_THROWS_AS(make_weights(c, {0.5, 0.5}), LengthMismatch);
  CHECK_THROWS_AS(make_weights(c, {-0.1, 0.6, 0.5}), DomainError);
  CHECK_THROWS_AS(make_weights(c, {0.2, 0.2, 0.2}), ConstraintViolation);
  const TreeConfig zero_root = validate_config(1, {2}, {0, 5}, 10);
  CHECK_THROWS_AS(make_weights(zero_root, {0.5, 0.5}), DivisionByZero);
}

TEST_CASE("sigma matrix matches hand-computed structures") {
  // Two-level binary tree, every level one update, N = 7.
  const TreeConfig c = validate_config(2, {2, 2}, {1, 1, 1}, 7);
  const ThreadCovariance cov = sigma_matrix(c, optimal_weights(c));
  REQUIRE(cov.matrix.rows() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(cov.matrix(i, i) == doctest::Approx(3.0).epsilon(1e-14));
  }
  // Threads (1,1) and (1,2) share level 1; (1,1) and (2,*) only the root.
  CHECK(cov.matrix(0, 1) == doctest::Approx(5.0 / 7.0).epsilon(1e-14));
  CHECK(cov.matrix(0, 2) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
  CHECK(cov.matrix(0, 3) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
  CHECK(cov.matrix.sum() == doctest::Approx(16.0).epsilon(1e-12));

  // Single split with a root third: Sigma = [[5/3, 1/3], [1/3, 5/3]].
  const TreeConfig c2 = validate_config(1, {2}, {3, 3}, 9);
  const ThreadCovariance cov2 = sigma_matrix(c2, optimal_weights(c2));
  CHECK(cov2.matrix(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
  CHECK(cov2.matrix(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(cov2.matrix.sum() == doctest::Approx(4.0).epsilon(1e-13));
}

TEST_CASE("sigma matrix is symmetric PSD with the ones eigenvector") {
  RandomStream rng(20240817ULL);
  for (int trial = 0; trial < 50; ++trial) {
    const TreeConfig c = random_config(rng);
    const WeightVector w = optimal_weights(c);
    const ThreadCovariance cov = sigma_matrix(c, w);
    const long long T = c.thread_count;

    // Bitwise symmetry by construction.
    for (long long i = 0; i < T; ++i) {
      for (long long j = 0; j < T; ++j) {
        CHECK(cov.matrix(i, j) == cov.matrix(j, i));
      }
    }
    // Ones is an eigenvector; the eigenvalue is any row sum.
    const double lambda = cov.ones_eigenvalue();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(T);
    CHECK((cov.matrix * ones - lambda * ones).cwiseAbs().maxCoeff() < 1e-10);
    // Nonnegative spectrum.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.matrix,
                                                      Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    // Quadratic form of ones at the optimum: exactly T^2, checked against a
    // closed-form accumulation that never builds the matrix.
    double quad = 0.0;
    for (int k = 0; k <= c.depth; ++k) {
      const double w_k = w.values[k];
      if (w_k == 0.0) continue;
      quad += w_k * w_k * static_cast<double>(c.total) /
              static_cast<double>(c.segment_lengths[k]) *
              static_cast<double>(T) * static_cast<double>(T) /
              static_cast<double>(c.level_counts[k]);
    }
    CHECK(std::abs(quad - static_cast<double>(T * T)) < 1e-7 * T * T);
    CHECK(std::abs(cov.matrix.sum() - static_cast<double>(T * T)) <
          1e-9 * T * T);
  }
}

TEST_CASE("suboptimal weights strictly increase the ones quadratic form") {
  RandomStream rng(99ULL);
  for (int trial = 0; trial < 25; ++trial) {
    const TreeConfig c = random_config(rng);
    const WeightVector w = optimal_weights(c);
    // Move a chunk of weight from the last level to the root.
    std::vector<double> bent = w.values;
    const double delta = 0.5 * bent.back();
    bent.back() -= delta;
    bent.front() += delta;
    const ThreadCovariance cov = sigma_matrix(c, make_weights(c, bent));
    const double T2 = static_cast<double>(c.thread_count * c.thread_count);
    CHECK(cov.matrix.sum() > T2 + 1e-9);
  }
}

TEST_CASE("interval width factor matches frozen values and decreases") {
  // Reference values computed with 50-digit arithmetic.
  CHECK(ci_length_factor(2, 0.1) ==
        doctest::Approx(3.562152837688528).epsilon(1e-10));
  CHECK(ci_length_factor(4, 0.1) ==
        doctest::Approx(1.5331457142195395).epsilon(1e-10));
  CHECK(ci_length_factor(8, 0.1) ==
        doctest::Approx(1.292821752047882).epsilon(1e-10));
  // Ratio to the no-splitting limit z_{0.95}/sqrt(2) at T = 4.
  const double limit = 1.1630871536766741;
  CHECK(ci_length_factor(4, 0.1) / limit ==
        doctest::Approx(1.3181692441302106).epsilon(1e-9));
  // Large-T convergence to the limit.
  CHECK(std::abs(ci_length_factor(1000000, 0.1) - limit) < 1e-3);

  for (double alpha : {0.05, 0.1}) {
    double prev = ci_length_factor(2, alpha);
    for (long long T = 3; T <= 64; ++T) {
      const double cur = ci_length_factor(T, alpha);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  CHECK_THROWS_AS(ci_length_factor(1, 0.1), DomainError);
  CHECK_THROWS_AS(ci_length_factor(4, 0.0), DomainError);
  CHECK_THROWS_AS(ci_length_factor(4, 1.0), DomainError);
}

TEST_CASE("presets satisfy the budget identity at awkward budgets") {
  for (const auto& name : preset_names()) {
    for (long long n : {100000LL, 99991LL, 7LL * 3LL * 5LL * 11LL}) {
      const TreeConfig c = preset_config(name, n);
      CHECK(c.total == n);  // validate_config enforced the identity already
    }
  }
  // The default at N = 10^5: remainder of the seven-way split lands in n_0.
  const TreeConfig def = preset_config("default", 100000);
  CHECK(def.segment_lengths == std::vector<long long>{14290, 14285, 14285});
  // Zero-root presets.
  const TreeConfig s4 = preset_config("split4", 1000000);
  CHECK(s4.segment_lengths == std::vector<long long>{0, 250000});
  const TreeConfig rs2 = preset_config("root-split2", 9);
  CHECK(rs2.segment_lengths == std::vector<long long>{3, 3});

  CHECK_THROWS_AS(preset_config("no-such-preset", 100), BadLength);
  CHECK_THROWS_AS(preset_config("default", 3), BadLength);
}
