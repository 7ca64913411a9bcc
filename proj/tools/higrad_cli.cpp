// Command-line front end: configuration checks, fitting with intervals on
// real data, and the simulation harness.
//
// Exit codes: 0 success, 1 usage error, 2 configuration or data error,
// 3 numerical failure.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "higrad/data.hpp"
#include "higrad/errors.hpp"
#include "higrad/experiments.hpp"
#include "higrad/inference.hpp"
#include "higrad/json_io.hpp"
#include "higrad/models.hpp"
#include "higrad/sgd.hpp"
#include "higrad/special_functions.hpp"
#include "higrad/tree.hpp"

namespace {

using higrad::ConfigMismatch;
using higrad::IoError;
using higrad::TreeConfig;
using higrad::WeightVector;
using nlohmann::json;

bool file_exists(const std::string& path) {
  std::ifstream in(path);
  return static_cast<bool>(in);
}

// --config accepts either a preset name or a path to a configuration JSON
// file.  Presets need a budget (--n); files carry their own N, which --n,
// when given, must match.
std::pair<TreeConfig, WeightVector> resolve_config(const std::string& config_arg,
                                                   std::optional<long long> n) {
  const auto& presets = higrad::preset_names();
  if (std::find(presets.begin(), presets.end(), config_arg) != presets.end()) {
    if (!n) {
      throw ConfigMismatch("preset '" + config_arg + "' needs a budget (--n)");
    }
    TreeConfig config = higrad::preset_config(config_arg, *n);
    WeightVector weights = higrad::optimal_weights(config);
    return {std::move(config), std::move(weights)};
  }
  if (!file_exists(config_arg)) {
    throw IoError("'" + config_arg +
                  "' is neither a preset name nor a readable file");
  }
  auto [config, weights] = higrad::config_from_json(higrad::load_json_file(config_arg));
  if (n && *n != config.total) {
    throw ConfigMismatch("--n " + std::to_string(*n) +
                         " contradicts the configuration's N = " +
                         std::to_string(config.total));
  }
  return {std::move(config), std::move(weights)};
}

// Streams output to a file when --out is set, else to stdout.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

struct FitArgs {
  std::string config;
  std::string data;
  std::string test_data;
  std::string model = "logistic";
  std::string sampling = "replacement";
  std::string interval = "confidence";
  std::string theta0 = "gaussian";
  std::string out;
  std::optional<long long> n;
  int test_count = 10;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  double step_c1 = 0.0;  // 0 = model default
  double step_c2 = 0.0;
  double step_exponent = 0.55;
  double theta0_scale = 0.1;
  double penalty = 1e-3;
  double huber_threshold = 1.0;
  int batch = 1;
  long long burn_in = 0;
  bool restart = false;
  bool remap_labels = false;
  bool prob_scale = false;
  int threads = 1;
};

int run_fit(const FitArgs& args) {
  auto [config, weights] = resolve_config(args.config, args.n);

  const higrad::ModelKind model = higrad::model_kind_from_name(args.model);
  const higrad::SparseDataset train =
      higrad::load_libsvm(args.data, args.remap_labels);
  higrad::SparseDataset test;
  if (!args.test_data.empty()) {
    test = higrad::load_libsvm(args.test_data, args.remap_labels);
  }
  const int d = std::max(train.dimension, test.dimension);
  higrad::DenseDataset train_dense = higrad::densify(train, d);

  const auto oracle =
      higrad::make_oracle(model, d, args.penalty, args.huber_threshold);
  higrad::StepSchedule schedule =
      args.step_c1 > 0.0
          ? higrad::make_schedule(args.step_c1, args.step_c2, args.step_exponent)
          : higrad::default_schedule(model);

  higrad::RunOptions options;
  options.seed = args.seed;
  options.batch_size = args.batch;
  options.burn_in = args.burn_in;
  options.restart = args.restart;
  options.theta0_mode = args.theta0 == "zeros" ? higrad::Theta0Mode::zeros
                                               : higrad::Theta0Mode::gaussian;
  options.theta0_scale = args.theta0_scale;
  options.threads = args.threads;

  // Test functionals: held-out rows when provided, else leading training
  // rows.  Chosen before the source consumes the training data.
  Eigen::MatrixXd test_x;
  if (!args.test_data.empty()) {
    test_x = higrad::densify(test, d).x;
  } else {
    const long long count =
        std::min<long long>(args.test_count, train_dense.size());
    test_x = train_dense.x.topRows(count);
  }

  std::unique_ptr<higrad::DataSource> source;
  if (args.sampling == "replacement") {
    source = std::make_unique<higrad::ReplacementSource>(std::move(train_dense),
                                                         args.seed);
  } else if (args.sampling == "partition") {
    source = std::make_unique<higrad::PartitionedSource>(std::move(train_dense));
  } else {
    throw ConfigMismatch("--sampling must be replacement or partition, got '" +
                         args.sampling + "'");
  }

  const higrad::SegmentAverages run =
      higrad::run_higrad(config, *oracle, *source, schedule, options);
  const higrad::ThreadEstimates estimates = higrad::thread_estimates(run, weights);
  const higrad::ThreadCovariance sigma = higrad::sigma_matrix(config, weights);

  std::cerr << "fit: T=" << config.thread_count << " threads, N=" << config.total
            << " updates, d=" << d << ", " << test_x.rows()
            << " test points\n";

  OutputTarget target(args.out);
  const bool predict = args.interval == "prediction";
  for (long long i = 0; i < test_x.rows(); ++i) {
    const Eigen::VectorXd x = test_x.row(i).transpose();
    const Eigen::VectorXd mu = estimates.theta * x;
    const double center = higrad::higrad_estimate(mu);
    const double se = higrad::standard_error(mu, sigma);
    higrad::IntervalResult result =
        predict ? higrad::prediction_interval(center, se, config.thread_count,
                                              args.alpha)
                : higrad::confidence_interval(center, se, config.thread_count,
                                              args.alpha);
    if (args.prob_scale) {
      if (model != higrad::ModelKind::logistic && model != higrad::ModelKind::ridge) {
        throw ConfigMismatch("--prob-scale only applies to logistic-type models");
      }
      result = higrad::link_transformed_interval(
          result, [](double u) { return higrad::special::expit(u); },
          config.thread_count);
    }
    target.stream() << higrad::interval_to_json(result).dump() << '\n';
  }
  return 0;
}

struct SimulateArgs {
  std::string spec;
  std::string out;
  std::string format = "csv";
  std::optional<long long> n;
  std::optional<int> replicates;
  std::optional<int> test_points;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool full_scale = false;
};

higrad::ExperimentSpec load_spec(const SimulateArgs& args) {
  higrad::ExperimentSpec spec =
      higrad::parse_experiment_spec(higrad::load_json_file(args.spec));
  if (args.n) {
    // Rescale: presets resolve against the new budget; explicit configs must
    // already match it.
    json j = higrad::load_json_file(args.spec);
    j["n"] = *args.n;
    spec = higrad::parse_experiment_spec(j);
  }
  if (args.replicates) spec.replicates = *args.replicates;
  if (args.test_points) spec.test_points = *args.test_points;
  if (args.alpha) spec.alpha = *args.alpha;
  if (args.seed) spec.seed = *args.seed;
  spec.threads = args.threads;

  // Desk-scale guard: the default budgets run on a laptop; anything near the
  // full-size protocols must be requested explicitly.
  const double cost = static_cast<double>(spec.n) *
                      (spec.replicates + spec.sgd_replicates) *
                      static_cast<double>(spec.d) *
                      static_cast<double>(spec.configs.size());
  if (cost > 2e9 && !args.full_scale) {
    throw ConfigMismatch(
        "this experiment costs about " + std::to_string(cost) +
        " update-coordinates; pass --full-scale to run it anyway");
  }
  return spec;
}

int run_simulate(const SimulateArgs& args,
                 higrad::Report (*experiment)(const higrad::ExperimentSpec&)) {
  const higrad::ExperimentSpec spec = load_spec(args);
  const higrad::Report report = experiment(spec);
  OutputTarget target(args.out);
  higrad::write_report(report, target.stream(), args.format);
  return 0;
}

void add_simulate_flags(CLI::App* cmd, SimulateArgs& args) {
  cmd->add_option("--spec", args.spec, "experiment specification JSON file")
      ->required();
  cmd->add_option("--out", args.out, "output file (default: stdout)");
  cmd->add_option("--format", args.format, "report format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--n", args.n, "override the update budget");
  cmd->add_option("--replicates", args.replicates, "override the replicate count");
  cmd->add_option("--test-points", args.test_points, "override the test-point count");
  cmd->add_option("--alpha", args.alpha, "override the miscoverage level");
  cmd->add_option("--seed", args.seed, "override the experiment seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads for replicates (0 = all cores)");
  cmd->add_flag("--full-scale", args.full_scale,
                "allow budgets beyond desk scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Tree-structured averaged SGD with confidence and prediction intervals"};
  app.require_subcommand(1);

  // --- validate / weights -------------------------------------------------
  std::string config_arg;
  std::optional<long long> n_arg;
  auto* validate_cmd =
      app.add_subcommand("validate", "check a configuration and print its normal form");
  validate_cmd->add_option("--config", config_arg, "preset name or JSON file")
      ->required();
  validate_cmd->add_option("--n", n_arg, "budget for preset configurations");

  auto* weights_cmd =
      app.add_subcommand("weights", "print the variance-optimal weights");
  weights_cmd->add_option("--config", config_arg, "preset name or JSON file")
      ->required();
  weights_cmd->add_option("--n", n_arg, "budget for preset configurations");

  // --- fit ----------------------------------------------------------------
  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand(
      "fit", "run on a LibSVM dataset and print per-test-point interval JSON");
  fit_cmd->add_option("--config", fit_args.config, "preset name or JSON file")
      ->required();
  fit_cmd->add_option("--data", fit_args.data, "training data (LibSVM format)")
      ->required();
  fit_cmd->add_option("--test-data", fit_args.test_data,
                      "held-out rows whose functionals get intervals");
  fit_cmd->add_option("--model", fit_args.model,
                      "linear | logistic | ridge | huber");
  fit_cmd->add_option("--n", fit_args.n, "update budget (required for presets)");
  fit_cmd->add_option("--test-count", fit_args.test_count,
                      "training rows to use as test points when --test-data is absent");
  fit_cmd->add_option("--alpha", fit_args.alpha, "miscoverage level");
  fit_cmd->add_option("--seed", fit_args.seed, "run seed");
  fit_cmd->add_option("--step-c1", fit_args.step_c1,
                      "step scale (0 = model default)");
  fit_cmd->add_option("--step-c2", fit_args.step_c2, "step shift");
  fit_cmd->add_option("--step-exponent", fit_args.step_exponent, "step exponent");
  fit_cmd->add_option("--theta0", fit_args.theta0, "zeros | gaussian")
      ->check(CLI::IsMember({"zeros", "gaussian"}));
  fit_cmd->add_option("--theta0-scale", fit_args.theta0_scale,
                      "spread of the random start");
  fit_cmd->add_option("--penalty", fit_args.penalty, "ridge penalty");
  fit_cmd->add_option("--huber-threshold", fit_args.huber_threshold,
                      "huber clipping point");
  fit_cmd->add_option("--batch", fit_args.batch, "data per update");
  fit_cmd->add_option("--burn-in", fit_args.burn_in,
                      "root updates excluded from the averages");
  fit_cmd->add_flag("--restart", fit_args.restart,
                    "restart the step schedule at each segment");
  fit_cmd->add_flag("--remap-labels", fit_args.remap_labels,
                    "remap +1/-1 labels to 1/0");
  fit_cmd->add_option("--sampling", fit_args.sampling,
                      "replacement | partition")
      ->check(CLI::IsMember({"replacement", "partition"}));
  fit_cmd->add_option("--interval", fit_args.interval,
                      "confidence | prediction")
      ->check(CLI::IsMember({"confidence", "prediction"}));
  fit_cmd->add_flag("--prob-scale", fit_args.prob_scale,
                    "report logistic intervals on the probability scale");
  fit_cmd->add_option("--threads", fit_args.threads,
                      "worker threads for the segment tree (0 = all cores)");
  fit_cmd->add_option("--out", fit_args.out, "output file (default: stdout)");

  // --- simulate-* ---------------------------------------------------------
  SimulateArgs accuracy_args, coverage_args, predict_args;
  auto* accuracy_cmd = app.add_subcommand(
      "simulate-accuracy", "estimation risk against plain averaged SGD");
  add_simulate_flags(accuracy_cmd, accuracy_args);
  auto* coverage_cmd = app.add_subcommand(
      "simulate-coverage", "confidence-interval coverage at test functionals");
  add_simulate_flags(coverage_cmd, coverage_args);
  auto* predict_cmd = app.add_subcommand(
      "predict-coverage", "prediction-interval coverage across fresh runs");
  add_simulate_flags(predict_cmd, predict_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (validate_cmd->parsed()) {
      auto [config, weights] = resolve_config(config_arg, n_arg);
      std::cout << higrad::config_to_json(config, weights).dump(2) << '\n';
      return 0;
    }
    if (weights_cmd->parsed()) {
      auto [config, weights] = resolve_config(config_arg, n_arg);
      std::cout << json(higrad::optimal_weights(config).values).dump() << '\n';
      return 0;
    }
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (accuracy_cmd->parsed())
      return run_simulate(accuracy_args, higrad::accuracy_experiment);
    if (coverage_cmd->parsed())
      return run_simulate(coverage_args, higrad::coverage_experiment);
    if (predict_cmd->parsed())
      return run_simulate(predict_args, higrad::prediction_coverage_experiment);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const higrad::Error& err) {
    std::cerr << "error: " << err.kind() << ": " << err.what() << '\n';
    return err.category() == higrad::ErrorCategory::numerical ? 3 : 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  }
}
