#pragma once

// The stochastic-gradient runner.
//
// run_higrad executes the whole tree: the root segment starts from theta_0,
// each child segment starts from its parent's final iterate, and every
// segment records the plain average of its own post-update iterates.  Step
// sizes follow one global schedule indexed by each update's depth in the
// thread (update j of a level-k segment uses gamma(j + L_{k-1})), unless the
// restart option resets the index to zero at every segment boundary.
//
// Two execution paths produce bitwise-identical results: a serial recursive
// reference, and an OpenMP task version that runs sibling segments
// concurrently once their parent finishes.  They agree bit for bit because
// each segment consumes a private data shard and owns all of its state, so
// scheduling cannot reorder any floating-point operation within a segment.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "higrad/data.hpp"
#include "higrad/models.hpp"
#include "higrad/rng.hpp"
#include "higrad/tree.hpp"

namespace higrad {

// Step sizes gamma_j = c1 / (j + c2)^exponent for j = 1, 2, ...; the
// exponent must lie in (0.5, 1) for the averaged iterates to obey the
// normal limit the intervals rely on, and c1 > 0, c2 >= 0.
struct StepSchedule {
  double c1 = 0.1;
  double c2 = 0.0;
  double exponent = 0.55;
};

// Validates the ranges above (DomainError) and returns the schedule.
StepSchedule make_schedule(double c1, double c2, double exponent);

// gamma_j for update index j >= 1.
double step_size(const StepSchedule& schedule, long long j);

// The runner takes any positive step function of the update index; tests
// use this to drive segments with schedules the validated struct would
// reject (constant steps, say).
using StepFn = std::function<double(long long)>;
StepFn step_fn(const StepSchedule& schedule);

enum class Theta0Mode { zeros, gaussian };

struct RunOptions {
  std::uint64_t seed = 0;
  int batch_size = 1;           // data per update; gradients are averaged
  long long burn_in = 0;        // discarded root updates before averaging starts
  bool restart = false;         // reset the step index at each segment
  Theta0Mode theta0_mode = Theta0Mode::gaussian;
  double theta0_scale = 0.1;    // theta_0 ~ N(0, scale^2 I) in gaussian mode
  int threads = 1;              // 1 = serial reference; 0 = all available
};

// Starting point drawn from (seed, theta0 tag); zeros mode ignores the seed.
Eigen::VectorXd initial_theta(int d, const RunOptions& options);

// What one segment leaves behind.
struct SegmentStats {
  Eigen::VectorXd average;       // mean of the segment's post-update iterates
  Eigen::VectorXd last_iterate;  // handed to the children
  long long count = 0;           // number of averaged iterates (n_k)
};

// All segments of one run, indexed by TreeConfig::segment_id.
struct SegmentAverages {
  TreeConfig config;
  std::vector<SegmentStats> segments;

  const SegmentStats& at(std::span<const int> segment_path) const;
};

// Runs one segment: "updates" gradient steps from theta_in, update j using
// step(j + step_offset) and one batch from the shard, averaging the iterates
// produced after the first "burn_in" updates.  Throws ShardExhausted if the
// shard runs dry and BadLength if burn_in >= updates with updates > 0.
SegmentStats run_segment(const Eigen::VectorXd& theta_in, DatumStream& shard,
                         const GradientOracle& oracle, const StepFn& step,
                         long long updates, long long step_offset,
                         long long burn_in, int batch_size);

// Runs the full tree.  Burn-in applies to the root segment only (the
// discarded updates still advance the step index and consume data).
SegmentAverages run_higrad(const TreeConfig& config, const GradientOracle& oracle,
                           DataSource& source, const StepSchedule& schedule,
                           const RunOptions& options);

// Plain averaged SGD over a budget of "total" updates: a depth-0 tree.  The
// result is the average of all post-burn-in iterates.
Eigen::VectorXd run_vanilla_sgd(const GradientOracle& oracle, DataSource& source,
                                long long total, const StepSchedule& schedule,
                                const RunOptions& options);

}  // namespace higrad
