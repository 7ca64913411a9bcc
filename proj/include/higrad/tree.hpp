#pragma once

// The segment tree that organizes a gradient-descent run.
//
// A configuration of depth K splits one long run of N stochastic-gradient
// updates into a rooted tree: a single root segment of n_0 updates, which
// forks into B_1 segments of n_1 updates, each of which forks into B_2
// segments of n_2 updates, and so on.  A "thread" is a root-to-leaf chain;
// there are T = B_1 * ... * B_K of them, and every update along a thread
// consumes one fresh datum, so the budget constraint is
//
//     n_0 + B_1 n_1 + B_1 B_2 n_2 + ... + B_1...B_K n_K = N.
//
// Averaging each thread's segments with fixed weights w_0..w_K yields T
// correlated estimates whose T x T correlation structure Sigma depends only
// on the configuration and weights -- two threads that share the first p
// levels of their paths have covariance sum_{k<=p} w_k^2 N / n_k.  That
// known structure is what later turns the T estimates into t-based
// confidence statements.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace higrad {

// Root-to-leaf branch choices, 1-based: path[k-1] in {1..B_k}.  A prefix of
// length k < K addresses an internal segment at level k; the empty path is
// the root.
using ThreadPath = std::vector<int>;

struct TreeConfig {
  // Primary fields.
  int depth = 0;                            // K >= 0
  std::vector<int> branching;               // B_1..B_K, each >= 2
  std::vector<long long> segment_lengths;   // n_0..n_K, >= 0, n_K >= 1
  long long total = 0;                      // N

  // Derived fields, filled by validate_config.
  long long thread_count = 1;               // T = prod B_k
  std::vector<long long> cumulative_lengths;  // L_k = n_0 + ... + n_k
  std::vector<long long> level_counts;      // Pi_k = B_1...B_k (Pi_0 = 1)
  std::vector<long long> level_offsets;     // first segment id at level k
  long long segment_count = 0;              // sum of Pi_k over levels

  // Flat id of the segment addressed by a path prefix (level = path.size()).
  // Ids enumerate level by level; within a level, the lexicographic rank of
  // the path.  Throws BadBranching on an out-of-range branch choice.
  long long segment_id(std::span<const int> path) const;

  // Inverse of segment_id.
  ThreadPath segment_path(long long id) const;
  int segment_level(long long id) const;

  bool operator==(const TreeConfig& other) const;
};

// Checks every structural invariant and fills the derived fields:
//   * depth == branching.size(), depth + 1 == segment_lengths.size(),
//     else LengthMismatch;
//   * every B_k >= 2, else BadBranching;
//   * every n_k >= 0 and n_K >= 1 (leaf segments must do work), with
//     negative or zero-leaf lengths raising BadLength;
//   * sum_k Pi_k n_k == N exactly, else ConstraintViolation (the message
//     carries both sides of the identity).
TreeConfig validate_config(int depth, std::vector<int> branching,
                           std::vector<long long> segment_lengths,
                           long long total);

// Per-level averaging weights w_0..w_K, nonnegative, summing to 1.
struct WeightVector {
  std::vector<double> values;
};

// The variance-optimal weights w_k = n_k Pi_k / N.  They always sum to
// exactly 1 because of the budget identity, including when n_0 = 0 (the
// root then simply gets weight zero; no renormalization is involved).
WeightVector optimal_weights(const TreeConfig& config);

// Validates an explicit weight vector against a configuration: length K+1
// (LengthMismatch), entries >= 0 and finite (DomainError), sum within 1e-12
// of 1 (ConstraintViolation), and w_k > 0 only where n_k > 0, since a level
// of zero-length segments carries no average to weight (DivisionByZero).
WeightVector make_weights(const TreeConfig& config, std::vector<double> values);

// All T root-to-leaf paths in lexicographic order.  This order is the row
// order of every thread-indexed vector and matrix in the package.
std::vector<ThreadPath> enumerate_threads(const TreeConfig& config);

// Number of leading levels on which two full-length paths agree (the root
// is shared by definition, so the result counts levels 1..K).  Throws
// LengthMismatch if the paths have different lengths.
int shared_depth(const ThreadPath& a, const ThreadPath& b);

// The T x T matrix Sigma with entries sum_{k=0}^{p} w_k^2 N / n_k where p is
// the shared depth of the two threads (diagonal: p = K).  Levels with
// w_k = 0 contribute nothing and are skipped, which makes n_0 = 0 safe under
// optimal weights; a positive weight on a zero-length level throws
// DivisionByZero.  With the optimal weights, ones' quadratic form
// 1' Sigma 1 equals exactly T^2, the minimum over all valid weights.
struct ThreadCovariance {
  TreeConfig config;
  WeightVector weights;
  Eigen::MatrixXd matrix;  // T x T, symmetric positive definite

  // Sigma has the all-ones vector as an eigenvector; this is its eigenvalue
  // (any row sum).
  double ones_eigenvalue() const;
};

ThreadCovariance sigma_matrix(const TreeConfig& config, const WeightVector& weights);

// Number of updates a single thread performs, L_K = n_0 + ... + n_K.
long long thread_length(const TreeConfig& config);

// Expected confidence-interval half-width at T threads relative to the
// estimate's sampling scale: t_{T-1,1-alpha/2} * Gamma(T/2) /
// (sqrt(T-1) * Gamma((T-1)/2)).  Strictly decreasing in T >= 2 and
// approaching z_{1-alpha/2}/sqrt(2) from above, so it prices how much
// interval width a given amount of splitting costs.  Throws DomainError for
// T < 2 or alpha outside (0, 1).
double ci_length_factor(long long num_threads, double alpha);

// Named stock configurations at budget N.  "default" is the two-level
// binary tree with a root; the others cover the single- and two-level
// splits with and without a root segment that the simulations compare.
// Lengths are the floor of the even split; any remainder lands in n_0 so
// the budget identity stays exact.
//
//   default       K=2, B=(2,2), n_0 = n_1 = n_2 = N/7
//   split2        K=1, B=(2),   n_0 = 0,   n_1 = N/2
//   root-split2   K=1, B=(2),   n_0 = n_1 = N/3
//   split4        K=1, B=(4),   n_0 = 0,   n_1 = N/4
//   root-split4   K=1, B=(4),   n_0 = n_1 = N/5
//   split2x2      K=2, B=(2,2), n_0 = 0,   n_1 = n_2 = N/6
//
// Throws BadLength for an unknown name or a budget too small to give every
// leaf at least one update.
TreeConfig preset_config(const std::string& name, long long total);

// The preset names above, in the order listed.
const std::vector<std::string>& preset_names();

}  // namespace higrad
