#include "higrad/sgd.hpp"

#include <cmath>
#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "higrad/errors.hpp"

namespace higrad {

StepSchedule make_schedule(double c1, double c2, double exponent) {
  if (!(c1 > 0.0) || !std::isfinite(c1)) {
    throw DomainError("step scale c1 must be positive, got " + std::to_string(c1));
  }
  if (!(c2 >= 0.0) || !std::isfinite(c2)) {
    throw DomainError("step shift c2 must be >= 0, got " + std::to_string(c2));
  }
  if (!(exponent > 0.5 && exponent < 1.0)) {
    throw DomainError("step exponent must lie in (0.5, 1), got " +
                      std::to_string(exponent));
  }
  return StepSchedule{c1, c2, exponent};
}

double step_size(const StepSchedule& schedule, long long j) {
  if (j < 1) throw DomainError("step index must be >= 1, got " + std::to_string(j));
  return schedule.c1 *
         std::pow(static_cast<double>(j) + schedule.c2, -schedule.exponent);
}

StepFn step_fn(const StepSchedule& schedule) {
  return [schedule](long long j) { return step_size(schedule, j); };
}

Eigen::VectorXd initial_theta(int d, const RunOptions& options) {
  if (d < 1) throw BadDimension("dimension must be >= 1, got " + std::to_string(d));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  if (options.theta0_mode == Theta0Mode::gaussian) {
    RandomStream rng(derive_stream_key(options.seed, stream_tag::theta0));
    for (int i = 0; i < d; ++i) theta[i] = options.theta0_scale * rng.normal();
  }
  return theta;
}

const SegmentStats& SegmentAverages::at(std::span<const int> segment_path) const {
  const long long id = config.segment_id(segment_path);
  if (id >= static_cast<long long>(segments.size())) {
    throw MissingSegment("segment " + std::to_string(id) +
                         " not present in this run");
  }
  return segments[id];
}

SegmentStats run_segment(const Eigen::VectorXd& theta_in, DatumStream& shard,
                         const GradientOracle& oracle, const StepFn& step,
                         long long updates, long long step_offset,
                         long long burn_in, int batch_size) {
  if (updates < 0) {
    throw BadLength("negative update count " + std::to_string(updates));
  }
  if (batch_size < 1) {
    throw BadLength("batch size must be >= 1, got " + std::to_string(batch_size));
  }
  if (burn_in < 0 || (updates > 0 && burn_in >= updates) ||
      (updates == 0 && burn_in > 0)) {
    throw BadLength("burn-in of " + std::to_string(burn_in) +
                    " leaves no iterates to average over " +
                    std::to_string(updates) + " updates");
  }
  const int d = oracle.dim();

  SegmentStats stats;
  Eigen::VectorXd theta = theta_in;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad(d), batch_grad(d), x(d);
  double y = 0.0;

  for (long long j = 1; j <= updates; ++j) {
    if (batch_size == 1) {
      if (!shard.next(x, y)) {
        throw ShardExhausted("shard ran dry at update " + std::to_string(j));
      }
      oracle.gradient(theta, x, y, grad);
    } else {
      batch_grad.setZero();
      for (int b = 0; b < batch_size; ++b) {
        if (!shard.next(x, y)) {
          throw ShardExhausted("shard ran dry at update " + std::to_string(j));
        }
        oracle.gradient(theta, x, y, grad);
        batch_grad += grad;
      }
      grad = batch_grad / static_cast<double>(batch_size);
    }
    const double gamma = step(step_offset + j);
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw DomainError("step size at index " + std::to_string(step_offset + j) +
                        " is " + std::to_string(gamma));
    }
    theta.noalias() -= gamma * grad;
    if (j > burn_in) sum += theta;
  }

  const long long kept = updates - burn_in;
  stats.count = updates > 0 ? kept : 0;
  stats.last_iterate = theta;
  stats.average = stats.count > 0 ? (sum / static_cast<double>(kept)).eval() : theta;
  if (!stats.last_iterate.allFinite()) {
    throw DomainError("iterates diverged (non-finite theta after " +
                      std::to_string(updates) + " updates)");
  }
  return stats;
}

namespace {

struct RunContext {
  const TreeConfig& config;
  const GradientOracle& oracle;
  DataSource& source;
  StepFn step;
  const RunOptions& options;
  SegmentAverages& out;
};

// Runs the segment at `path` from theta_in and recurses into its children.
void run_subtree_serial(const RunContext& ctx, const ThreadPath& path,
                        const Eigen::VectorXd& theta_in) {
  const int level = static_cast<int>(path.size());
  const long long offset =
      (ctx.options.restart || level == 0)
          ? 0
          : ctx.config.cumulative_lengths[level - 1];
  const long long burn = level == 0 ? ctx.options.burn_in : 0;
  auto shard = ctx.source.open_shard(ctx.config, path, ctx.options.batch_size);
  SegmentStats stats = run_segment(theta_in, *shard, ctx.oracle, ctx.step,
                                   ctx.config.segment_lengths[level], offset,
                                   burn, ctx.options.batch_size);
  const long long id = ctx.config.segment_id(path);
  ctx.out.segments[id] = stats;
  if (level == ctx.config.depth) return;
  ThreadPath child = path;
  child.push_back(0);
  for (int b = 1; b <= ctx.config.branching[level]; ++b) {
    child.back() = b;
    run_subtree_serial(ctx, child, stats.last_iterate);
  }
}

#ifdef _OPENMP
// Task-parallel variant: children become OpenMP tasks once the parent's
// final iterate exists.  Identical arithmetic to the serial path -- every
// segment owns its shard, iterate, and output slot, so no floating-point
// operation crosses a thread boundary.
void run_subtree_tasks(const RunContext& ctx, const ThreadPath& path,
                       const Eigen::VectorXd& theta_in,
                       std::exception_ptr& failure) {
  SegmentStats stats;
  try {
    const int level = static_cast<int>(path.size());
    const long long offset =
        (ctx.options.restart || level == 0)
            ? 0
            : ctx.config.cumulative_lengths[level - 1];
    const long long burn = level == 0 ? ctx.options.burn_in : 0;
    auto shard = ctx.source.open_shard(ctx.config, path, ctx.options.batch_size);
    stats = run_segment(theta_in, *shard, ctx.oracle, ctx.step,
                        ctx.config.segment_lengths[level], offset, burn,
                        ctx.options.batch_size);
    ctx.out.segments[ctx.config.segment_id(path)] = stats;
  } catch (...) {
#pragma omp critical(higrad_run_failure)
    if (!failure) failure = std::current_exception();
    return;
  }
  const int level = static_cast<int>(path.size());
  if (level == ctx.config.depth) return;
  for (int b = 1; b <= ctx.config.branching[level]; ++b) {
    ThreadPath child = path;
    child.push_back(b);
#pragma omp task firstprivate(child) shared(ctx, stats, failure)
    run_subtree_tasks(ctx, child, stats.last_iterate, failure);
  }
#pragma omp taskwait
}
#endif

}  // namespace

SegmentAverages run_higrad(const TreeConfig& config, const GradientOracle& oracle,
                           DataSource& source, const StepSchedule& schedule,
                           const RunOptions& options) {
  if (source.dim() != oracle.dim()) {
    throw DimensionMismatch("source of dimension " + std::to_string(source.dim()) +
                            " feeding an oracle of dimension " +
                            std::to_string(oracle.dim()));
  }
  source.check_run(config, options.batch_size);

  SegmentAverages out;
  out.config = config;
  out.segments.resize(config.segment_count);
  const Eigen::VectorXd theta0 = initial_theta(oracle.dim(), options);
  RunContext ctx{config, oracle, source, step_fn(schedule), options, out};

#ifdef _OPENMP
  if (options.threads != 1) {
    const int requested = options.threads == 0
                              ? omp_get_max_threads()
                              : options.threads;
    std::exception_ptr failure;
#pragma omp parallel num_threads(requested)
#pragma omp single
    run_subtree_tasks(ctx, ThreadPath{}, theta0, failure);
    if (failure) std::rethrow_exception(failure);
    return out;
  }
#endif
  run_subtree_serial(ctx, ThreadPath{}, theta0);
  return out;
}

Eigen::VectorXd run_vanilla_sgd(const GradientOracle& oracle, DataSource& source,
                                long long total, const StepSchedule& schedule,
                                const RunOptions& options) {
  const TreeConfig flat = validate_config(0, {}, {total}, total);
  const SegmentAverages run = run_higrad(flat, oracle, source, schedule, options);
  return run.segments[0].average;
}

}  // namespace higrad
