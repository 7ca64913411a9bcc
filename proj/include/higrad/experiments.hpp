#pragma once

// Simulation harness: repeated runs against synthetic ground truth, reported
// as flat (config, metric, value, stderr, n) tables.
//
// Replicate seeds are derived from the experiment seed, never from run
// order, and replicate results are reduced in replicate order regardless of
// how many worker threads executed them; reports are therefore byte-stable
// across thread counts and repeat invocations.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "higrad/data.hpp"
#include "higrad/models.hpp"
#include "higrad/sgd.hpp"
#include "higrad/tree.hpp"

namespace higrad {

// The stock step scale per model (exponent 0.55 throughout): 0.1 for the
// squared-loss family, 0.4 for the logistic family.
StepSchedule default_schedule(ModelKind kind);

// A configuration entry in an experiment: identifier, tree, and weights.
struct NamedConfig {
  std::string id;
  TreeConfig config;
  WeightVector weights;
};

struct ExperimentSpec {
  ModelKind model = ModelKind::linear;
  ThetaStarKind theta_star = ThetaStarKind::null_case;
  int d = 10;
  long long n = 100000;        // update budget N of every run
  int replicates = 200;        // fitted runs per configuration
  int sgd_replicates = 0;      // extra plain-SGD fleet (prediction coverage)
  int test_points = 100;       // functionals examined per run
  double alpha = 0.1;
  std::uint64_t seed = 1;
  StepSchedule step{0.1, 0.0, 0.55};
  Theta0Mode theta0_mode = Theta0Mode::gaussian;
  double theta0_scale = 0.1;
  int batch_size = 1;
  long long burn_in = 0;
  bool restart = false;
  int threads = 1;             // replicate-level parallelism
  std::vector<NamedConfig> configs;
};

// One output row.  stderr_of_value is the standard error attached to value;
// n_replicates the number of independent replicates behind the row.
struct ReportRow {
  std::string config_id;
  std::string metric;
  double value = 0.0;
  double stderr_of_value = 0.0;
  long long n_replicates = 0;
};

struct Report {
  std::vector<ReportRow> rows;
};

// Estimation accuracy against the generating parameter.  Per configuration:
//   risk        mean over replicates of |theta_hat - theta*|
//   risk_sgd    the same for plain averaged SGD run with the matching seed
//   risk_ratio  ratio of the two means, with a delta-method standard error
//               that respects the seed pairing
Report accuracy_experiment(const ExperimentSpec& spec);

// Interval coverage at fixed test functionals x_1..x_m (drawn once from the
// experiment seed).  Per configuration:
//   coverage    share of (replicate, point) confidence intervals containing
//               the true x'theta*, with binomial standard error over
//               replicates
//   ci_length   mean interval length (logit scale for logistic models)
// Also reported once per experiment under config "truth": the average |x'theta*|
// scale of the test functionals ("signal_scale").
Report coverage_experiment(const ExperimentSpec& spec);

// Prediction-interval coverage across independent runs.  A fleet of
// "replicates" fitted runs produces, per test point, point predictions and
// prediction intervals; each prediction is checked against every other
// run's interval:
//   cross_coverage      mean over points of the pairwise hit rate
//   pi_length           mean prediction-interval length
// With sgd_replicates > 0, an independent plain-SGD fleet is also scored
// against the fitted runs' intervals:
//   sgd_in_prediction   mean over points of the SGD-vs-interval hit rate
// Standard errors are taken across test points.
Report prediction_coverage_experiment(const ExperimentSpec& spec);

// Serialization.  CSV column order is fixed:
// config_id,metric,value,stderr,n_replicates.  Doubles are rendered with the
// shortest representation that round-trips, so equal runs give equal bytes.
void write_report_csv(const Report& report, std::ostream& out);
void write_report_json(const Report& report, std::ostream& out);
void write_report(const Report& report, std::ostream& out, const std::string& format);

}  // namespace higrad
