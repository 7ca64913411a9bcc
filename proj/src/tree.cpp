#include "higrad/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "higrad/errors.hpp"
#include "higrad/special_functions.hpp"

namespace higrad {

long long TreeConfig::segment_id(std::span<const int> path) const {
  const int level = static_cast<int>(path.size());
  if (level > depth) {
    throw LengthMismatch("path of length " + std::to_string(level) +
                         " in a tree of depth " + std::to_string(depth));
  }
  long long rank = 0;
  for (int k = 0; k < level; ++k) {
    const int b = path[k];
    if (b < 1 || b > branching[k]) {
      throw BadBranching("branch choice " + std::to_string(b) + " at level " +
                         std::to_string(k + 1) + " exceeds B=" +
                         std::to_string(branching[k]));
    }
    rank = rank * branching[k] + (b - 1);
  }
  return level_offsets[level] + rank;
}

ThreadPath TreeConfig::segment_path(long long id) const {
  const int level = segment_level(id);
  long long rank = id - level_offsets[level];
  ThreadPath path(level);
  for (int k = level - 1; k >= 0; --k) {
    path[k] = static_cast<int>(rank % branching[k]) + 1;
    rank /= branching[k];
  }
  return path;
}

int TreeConfig::segment_level(long long id) const {
  if (id < 0 || id >= segment_count) {
    throw MissingSegment("segment id " + std::to_string(id) +
                         " outside 0.." + std::to_string(segment_count - 1));
  }
  int level = 0;
  while (level < depth && id >= level_offsets[level + 1]) ++level;
  return level;
}

bool TreeConfig::operator==(const TreeConfig& other) const {
  return depth == other.depth && branching == other.branching &&
         segment_lengths == other.segment_lengths && total == other.total;
}

TreeConfig validate_config(int depth, std::vector<int> branching,
                           std::vector<long long> segment_lengths,
                           long long total) {
  if (depth < 0) throw BadLength("negative depth " + std::to_string(depth));
  if (static_cast<int>(branching.size()) != depth) {
    throw LengthMismatch("depth " + std::to_string(depth) + " but " +
                         std::to_string(branching.size()) + " branching factors");
  }
  if (static_cast<int>(segment_lengths.size()) != depth + 1) {
    throw LengthMismatch("depth " + std::to_string(depth) + " needs " +
                         std::to_string(depth + 1) + " segment lengths, got " +
                         std::to_string(segment_lengths.size()));
  }
  for (int k = 0; k < depth; ++k) {
    if (branching[k] < 2) {
      throw BadBranching("B_" + std::to_string(k + 1) + " = " +
                         std::to_string(branching[k]) + " (must be >= 2)");
    }
  }
  for (int k = 0; k <= depth; ++k) {
    if (segment_lengths[k] < 0) {
      throw BadLength("n_" + std::to_string(k) + " = " +
                      std::to_string(segment_lengths[k]) + " (must be >= 0)");
    }
  }
  if (segment_lengths[depth] < 1) {
    throw BadLength("leaf segments must perform at least one update, got n_" +
                    std::to_string(depth) + " = " +
                    std::to_string(segment_lengths[depth]));
  }

  TreeConfig config;
  config.depth = depth;
  config.branching = std::move(branching);
  config.segment_lengths = std::move(segment_lengths);
  config.total = total;

  config.level_counts.assign(depth + 1, 1);
  config.level_offsets.assign(depth + 1, 0);
  config.cumulative_lengths.assign(depth + 1, 0);
  long long used = 0;
  long long running_length = 0;
  for (int k = 0; k <= depth; ++k) {
    if (k > 0) {
      config.level_counts[k] = config.level_counts[k - 1] * config.branching[k - 1];
      config.level_offsets[k] = config.level_offsets[k - 1] + config.level_counts[k - 1];
    }
    used += config.level_counts[k] * config.segment_lengths[k];
    running_length += config.segment_lengths[k];
    config.cumulative_lengths[k] = running_length;
  }
  config.thread_count = config.level_counts[depth];
  config.segment_count = config.level_offsets[depth] + config.level_counts[depth];

  if (used != total) {
    std::ostringstream msg;
    msg << "budget identity violated: sum_k B_1..B_k * n_k = " << used
        << " but N = " << total;
    throw ConstraintViolation(msg.str());
  }
  return config;
}

WeightVector optimal_weights(const TreeConfig& config) {
  WeightVector weights;
  weights.values.resize(config.depth + 1);
  for (int k = 0; k <= config.depth; ++k) {
    weights.values[k] =
        static_cast<double>(config.segment_lengths[k]) *
        static_cast<double>(config.level_counts[k]) /
        static_cast<double>(config.total);
  }
  return weights;
}

WeightVector make_weights(const TreeConfig& config, std::vector<double> values) {
  if (static_cast<int>(values.size()) != config.depth + 1) {
    throw LengthMismatch("expected " + std::to_string(config.depth + 1) +
                         " weights, got " + std::to_string(values.size()));
  }
  double sum = 0.0;
  for (int k = 0; k <= config.depth; ++k) {
    const double w = values[k];
    if (!std::isfinite(w) || w < 0.0) {
      throw DomainError("weight w_" + std::to_string(k) + " = " +
                        std::to_string(w) + " (must be finite and >= 0)");
    }
    if (w > 0.0 && config.segment_lengths[k] == 0) {
      throw DivisionByZero("positive weight w_" + std::to_string(k) +
                           " on a level with n_" + std::to_string(k) + " = 0");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ConstraintViolation("weights sum to " + std::to_string(sum) +
                              ", expected 1");
  }
  WeightVector weights;
  weights.values = std::move(values);
  return weights;
}

std::vector<ThreadPath> enumerate_threads(const TreeConfig& config) {
  std::vector<ThreadPath> threads;
  threads.reserve(config.thread_count);
  ThreadPath path(config.depth, 1);
  for (long long t = 0; t < config.thread_count; ++t) {
    threads.push_back(path);
    // Lexicographic increment, last level fastest.
    for (int k = config.depth - 1; k >= 0; --k) {
      if (path[k] < config.branching[k]) {
        ++path[k];
        break;
      }
      path[k] = 1;
    }
  }
  return threads;
}

int shared_depth(const ThreadPath& a, const ThreadPath& b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("paths of lengths " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  int p = 0;
  while (p < static_cast<int>(a.size()) && a[p] == b[p]) ++p;
  return p;
}

double ThreadCovariance::ones_eigenvalue() const {
  return matrix.row(0).sum();
}

ThreadCovariance sigma_matrix(const TreeConfig& config, const WeightVector& weights) {
  if (static_cast<int>(weights.values.size()) != config.depth + 1) {
    throw LengthMismatch("expected " + std::to_string(config.depth + 1) +
                         " weights, got " + std::to_string(weights.values.size()));
  }
  // Per-level contribution w_k^2 N / n_k, accumulated so that a pair sharing
  // depth p picks up the prefix sum through level p.
  std::vector<double> prefix(config.depth + 1, 0.0);
  double acc = 0.0;
  for (int k = 0; k <= config.depth; ++k) {
    const double w = weights.values[k];
    if (w != 0.0) {
      if (config.segment_lengths[k] == 0) {
        throw DivisionByZero("positive weight w_" + std::to_string(k) +
                             " on a level with n_" + std::to_string(k) + " = 0");
      }
      acc += w * w * static_cast<double>(config.total) /
             static_cast<double>(config.segment_lengths[k]);
    }
    prefix[k] = acc;
  }

  const auto threads = enumerate_threads(config);
  const long long T = config.thread_count;
  ThreadCovariance cov;
  cov.config = config;
  cov.weights = weights;
  cov.matrix.resize(T, T);
  for (long long i = 0; i < T; ++i) {
    for (long long j = 0; j <= i; ++j) {
      const int p = shared_depth(threads[i], threads[j]);
      cov.matrix(i, j) = prefix[p];
      cov.matrix(j, i) = prefix[p];
    }
  }
  return cov;
}

long long thread_length(const TreeConfig& config) {
  return config.cumulative_lengths[config.depth];
}

double ci_length_factor(long long num_threads, double alpha) {
  if (num_threads < 2) {
    throw DomainError("need at least 2 threads for an interval, got " +
                      std::to_string(num_threads));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha = " + std::to_string(alpha) +
                      " outside (0, 1)");
  }
  const double T = static_cast<double>(num_threads);
  const double q = special::t_quantile(T - 1.0, 1.0 - alpha / 2.0);
  // Gamma(T/2) / Gamma((T-1)/2) via log-gamma to stay finite for large T.
  const double gamma_ratio =
      std::exp(std::lgamma(T / 2.0) - std::lgamma((T - 1.0) / 2.0));
  return q * gamma_ratio / std::sqrt(T - 1.0);
}

namespace {

TreeConfig build_preset(int depth, std::vector<int> branching,
                        std::vector<long long> shares, long long total) {
  // shares[k] is the denominator weight of level k in the even split; a
  // zero share pins n_k = 0.  The floor remainder is absorbed by n_0.
  long long denom = 0;
  long long count = 1;
  std::vector<long long> counts(depth + 1, 1);
  for (int k = 0; k <= depth; ++k) {
    if (k > 0) count *= branching[k - 1];
    counts[k] = count;
    if (shares[k] > 0) denom += counts[k];
  }
  std::vector<long long> lengths(depth + 1, 0);
  long long used = 0;
  for (int k = 0; k <= depth; ++k) {
    if (shares[k] > 0) {
      lengths[k] = total / denom;
      used += counts[k] * lengths[k];
    }
  }
  if (lengths[depth] < 1) {
    throw BadLength("budget " + std::to_string(total) +
                    " too small for this preset");
  }
  lengths[0] += total - used;
  return validate_config(depth, std::move(branching), std::move(lengths), total);
}

}  // namespace

TreeConfig preset_config(const std::string& name, long long total) {
  if (name == "default") return build_preset(2, {2, 2}, {1, 1, 1}, total);
  if (name == "split2") return build_preset(1, {2}, {0, 1}, total);
  if (name == "root-split2") return build_preset(1, {2}, {1, 1}, total);
  if (name == "split4") return build_preset(1, {4}, {0, 1}, total);
  if (name == "root-split4") return build_preset(1, {4}, {1, 1}, total);
  if (name == "split2x2") return build_preset(2, {2, 2}, {0, 1, 1}, total);
  throw BadLength("unknown preset configuration '" + name + "'");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "default", "split2", "root-split2", "split4", "root-split4", "split2x2"};
  return names;
}

}  // namespace higrad
