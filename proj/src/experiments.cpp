#include "higrad/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "higrad/errors.hpp"
#include "higrad/inference.hpp"
#include "higrad/special_functions.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace higrad {

namespace {

using nlohmann::json;

// Runs body(l) for l = 0..count-1, optionally across OpenMP threads.  Bodies
// write only to their own slots of preallocated arrays, so execution order
// does not matter; the first exception wins and is rethrown at the end.
template <typename Body>
void for_each_replicate(int count, int threads, const Body& body) {
  if (threads == 1) {
    for (int l = 0; l < count; ++l) body(l);
    return;
  }
  std::exception_ptr failure;
#ifdef _OPENMP
  const int requested = threads == 0 ? omp_get_max_threads() : threads;
#pragma omp parallel for schedule(dynamic) num_threads(requested)
  for (int l = 0; l < count; ++l) {
    try {
      body(l);
    } catch (...) {
#pragma omp critical(higrad_replicate_failure)
      if (!failure) failure = std::current_exception();
    }
  }
#else
  for (int l = 0; l < count; ++l) body(l);
#endif
  if (failure) std::rethrow_exception(failure);
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// Standard error of the mean (sample standard deviation over sqrt(n)).
double sem_of(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (n - 1.0) / n);
}

RunOptions run_options_for(const ExperimentSpec& spec, std::uint64_t run_seed) {
  RunOptions options;
  options.seed = run_seed;
  options.batch_size = spec.batch_size;
  options.burn_in = spec.burn_in;
  options.restart = spec.restart;
  options.theta0_mode = spec.theta0_mode;
  options.theta0_scale = spec.theta0_scale;
  options.threads = 1;  // parallelism lives at the replicate level here
  return options;
}

void require_configs(const ExperimentSpec& spec) {
  if (spec.configs.empty()) throw BadLength("experiment lists no configurations");
  if (spec.replicates < 1) {
    throw BadLength("experiment needs at least 1 replicate, got " +
                    std::to_string(spec.replicates));
  }
  for (const auto& named : spec.configs) {
    if (named.config.total != spec.n) {
      throw ConfigMismatch("configuration '" + named.id + "' has budget " +
                           std::to_string(named.config.total) +
                           " but the experiment runs N = " + std::to_string(spec.n));
    }
  }
}

// Test functionals x_1..x_m drawn once from the experiment seed.
Eigen::MatrixXd draw_test_points(const ExperimentSpec& spec) {
  if (spec.test_points < 1) {
    throw BadLength("experiment needs at least 1 test point, got " +
                    std::to_string(spec.test_points));
  }
  RandomStream rng(derive_stream_key(spec.seed, stream_tag::test_points));
  Eigen::MatrixXd points(spec.test_points, spec.d);
  for (int i = 0; i < spec.test_points; ++i) {
    for (int j = 0; j < spec.d; ++j) points(i, j) = rng.normal();
  }
  return points;
}

}  // namespace

StepSchedule default_schedule(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear:
    case ModelKind::huber:
      return StepSchedule{0.1, 0.0, 0.55};
    case ModelKind::logistic:
    case ModelKind::ridge:
      return StepSchedule{0.4, 0.0, 0.55};
  }
  throw DomainError("unknown model kind");
}

Report accuracy_experiment(const ExperimentSpec& spec) {
  require_configs(spec);
  const Eigen::VectorXd theta_star = make_theta_star(spec.theta_star, spec.d);
  const SyntheticModel model{spec.model == ModelKind::logistic
                                 ? ModelKind::logistic
                                 : ModelKind::linear,
                             theta_star};
  const auto oracle = make_oracle(spec.model, spec.d);
  const int L = spec.replicates;
  const int C = static_cast<int>(spec.configs.size());

  std::vector<std::vector<double>> risk(C, std::vector<double>(L, 0.0));
  std::vector<double> risk_sgd(L, 0.0);

  for_each_replicate(L, spec.threads, [&](int l) {
    const std::uint64_t run_seed =
        derive_stream_key(spec.seed, stream_tag::replicate, {l});
    const RunOptions options = run_options_for(spec, run_seed);

    SyntheticSource sgd_source(model, run_seed);
    const Eigen::VectorXd sgd_avg =
        run_vanilla_sgd(*oracle, sgd_source, spec.n, spec.step, options);
    risk_sgd[l] = (sgd_avg - theta_star).norm();

    for (int c = 0; c < C; ++c) {
      SyntheticSource source(model, run_seed);
      const SegmentAverages run = run_higrad(spec.configs[c].config, *oracle,
                                             source, spec.step, options);
      const ThreadEstimates estimates =
          thread_estimates(run, spec.configs[c].weights);
      const Eigen::VectorXd theta_hat = estimates.theta.colwise().mean();
      risk[c][l] = (theta_hat - theta_star).norm();
    }
  });

  Report report;
  const double sgd_mean = mean_of(risk_sgd);
  for (int c = 0; c < C; ++c) {
    const std::string& id = spec.configs[c].id;
    const double m = mean_of(risk[c]);
    report.rows.push_back({id, "risk", m, sem_of(risk[c]), L});
    report.rows.push_back({id, "risk_sgd", sgd_mean, sem_of(risk_sgd), L});
    // Ratio of mean risks with a delta-method standard error that respects
    // the shared seeds: se^2 = var(a_l - r b_l) / (L B^2).
    const double ratio = m / sgd_mean;
    double ss = 0.0;
    for (int l = 0; l < L; ++l) {
      const double resid = risk[c][l] - ratio * risk_sgd[l];
      ss += resid * resid;
    }
    const double ratio_se =
        L > 1 ? std::sqrt(ss / (L - 1.0) / L) / sgd_mean : 0.0;
    report.rows.push_back({id, "risk_ratio", ratio, ratio_se, L});
  }
  return report;
}

Report coverage_experiment(const ExperimentSpec& spec) {
  require_configs(spec);
  const Eigen::VectorXd theta_star = make_theta_star(spec.theta_star, spec.d);
  const SyntheticModel model{spec.model == ModelKind::logistic
                                 ? ModelKind::logistic
                                 : ModelKind::linear,
                             theta_star};
  const auto oracle = make_oracle(spec.model, spec.d);
  const int L = spec.replicates;
  const int C = static_cast<int>(spec.configs.size());
  const int m = spec.test_points;
  const Eigen::MatrixXd points = draw_test_points(spec);
  const Eigen::VectorXd truth = points * theta_star;

  // Per-configuration interval machinery, built once.
  std::vector<ThreadCovariance> sigmas;
  std::vector<double> quantiles;
  sigmas.reserve(C);
  for (int c = 0; c < C; ++c) {
    sigmas.push_back(sigma_matrix(spec.configs[c].config, spec.configs[c].weights));
    const auto T = static_cast<double>(spec.configs[c].config.thread_count);
    quantiles.push_back(special::t_quantile(T - 1.0, 1.0 - spec.alpha / 2.0));
  }

  std::vector<std::vector<double>> covered(C, std::vector<double>(L, 0.0));
  std::vector<std::vector<double>> length(C, std::vector<double>(L, 0.0));

  for_each_replicate(L, spec.threads, [&](int l) {
    const std::uint64_t run_seed =
        derive_stream_key(spec.seed, stream_tag::replicate, {l});
    const RunOptions options = run_options_for(spec, run_seed);
    for (int c = 0; c < C; ++c) {
      SyntheticSource source(model, run_seed);
      const SegmentAverages run = run_higrad(spec.configs[c].config, *oracle,
                                             source, spec.step, options);
      const ThreadEstimates estimates =
          thread_estimates(run, spec.configs[c].weights);
      const Eigen::MatrixXd mu_all = estimates.theta * points.transpose();  // T x m
      long long hits = 0;
      double length_sum = 0.0;
      for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd mu = mu_all.col(i);
        const double center = higrad_estimate(mu);
        const double se = standard_error(mu, sigmas[c]);
        const double half = quantiles[c] * se;
        if (std::abs(center - truth[i]) <= half) ++hits;
        length_sum += 2.0 * half;
      }
      covered[c][l] = static_cast<double>(hits) / static_cast<double>(m);
      length[c][l] = length_sum / static_cast<double>(m);
    }
  });

  Report report;
  report.rows.push_back({"truth", "signal_scale",
                         truth.cwiseAbs().mean(), 0.0, m});
  for (int c = 0; c < C; ++c) {
    const std::string& id = spec.configs[c].id;
    const double p_hat = mean_of(covered[c]);
    const double binom_se =
        std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat)) / static_cast<double>(L));
    report.rows.push_back({id, "coverage", p_hat, binom_se, L});
    report.rows.push_back({id, "ci_length", mean_of(length[c]), sem_of(length[c]), L});
  }
  return report;
}

Report prediction_coverage_experiment(const ExperimentSpec& spec) {
  require_configs(spec);
  const Eigen::VectorXd theta_star = make_theta_star(spec.theta_star, spec.d);
  const SyntheticModel model{spec.model == ModelKind::logistic
                                 ? ModelKind::logistic
                                 : ModelKind::linear,
                             theta_star};
  const auto oracle = make_oracle(spec.model, spec.d);
  const int L = spec.replicates;
  const int Ls = spec.sgd_replicates;
  const int C = static_cast<int>(spec.configs.size());
  const int m = spec.test_points;
  const Eigen::MatrixXd points = draw_test_points(spec);

  std::vector<ThreadCovariance> sigmas;
  std::vector<double> widened_quantiles;  // sqrt(2) t_{T-1,1-alpha/2}
  for (int c = 0; c < C; ++c) {
    sigmas.push_back(sigma_matrix(spec.configs[c].config, spec.configs[c].weights));
    const auto T = static_cast<double>(spec.configs[c].config.thread_count);
    widened_quantiles.push_back(
        std::sqrt(2.0) *
        special::t_quantile(T - 1.0, 1.0 - spec.alpha / 2.0));
  }

  // pred[c](l, i), half[c](l, i): fitted-fleet predictions and PI half-widths.
  std::vector<Eigen::MatrixXd> pred(C, Eigen::MatrixXd(L, m));
  std::vector<Eigen::MatrixXd> half(C, Eigen::MatrixXd(L, m));

  for_each_replicate(L, spec.threads, [&](int l) {
    const std::uint64_t run_seed =
        derive_stream_key(spec.seed, stream_tag::replicate, {l, 0});
    const RunOptions options = run_options_for(spec, run_seed);
    for (int c = 0; c < C; ++c) {
      SyntheticSource source(model, run_seed);
      const SegmentAverages run = run_higrad(spec.configs[c].config, *oracle,
                                             source, spec.step, options);
      const ThreadEstimates estimates =
          thread_estimates(run, spec.configs[c].weights);
      const Eigen::MatrixXd mu_all = estimates.theta * points.transpose();
      for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd mu = mu_all.col(i);
        pred[c](l, i) = higrad_estimate(mu);
        half[c](l, i) = widened_quantiles[c] * standard_error(mu, sigmas[c]);
      }
    }
  });

  Eigen::MatrixXd sgd_pred(std::max(Ls, 1), m);
  if (Ls > 0) {
    for_each_replicate(Ls, spec.threads, [&](int l) {
      const std::uint64_t run_seed =
          derive_stream_key(spec.seed, stream_tag::replicate, {l, 1});
      const RunOptions options = run_options_for(spec, run_seed);
      SyntheticSource source(model, run_seed);
      const Eigen::VectorXd avg =
          run_vanilla_sgd(*oracle, source, spec.n, spec.step, options);
      sgd_pred.row(l) = (points * avg).transpose();
    });
  }

  Report report;
  for (int c = 0; c < C; ++c) {
    const std::string& id = spec.configs[c].id;

    // Pairwise hit rate over ordered pairs of distinct fitted runs.
    std::vector<double> point_rate(m, 0.0);
    if (L > 1) {
      for (int i = 0; i < m; ++i) {
        long long hits = 0;
        for (int l1 = 0; l1 < L; ++l1) {
          for (int l2 = 0; l2 < L; ++l2) {
            if (l1 == l2) continue;
            if (std::abs(pred[c](l1, i) - pred[c](l2, i)) <= half[c](l2, i)) ++hits;
          }
        }
        point_rate[i] = static_cast<double>(hits) /
                        (static_cast<double>(L) * static_cast<double>(L - 1));
      }
    }
    report.rows.push_back({id, "cross_coverage", mean_of(point_rate),
                           sem_of(point_rate), L});

    std::vector<double> mean_len(L, 0.0);
    for (int l = 0; l < L; ++l) mean_len[l] = 2.0 * half[c].row(l).mean();
    report.rows.push_back({id, "pi_length", mean_of(mean_len), sem_of(mean_len), L});

    if (Ls > 0) {
      std::vector<double> sgd_rate(m, 0.0);
      for (int i = 0; i < m; ++i) {
        long long hits = 0;
        for (int ls = 0; ls < Ls; ++ls) {
          for (int l = 0; l < L; ++l) {
            if (std::abs(sgd_pred(ls, i) - pred[c](l, i)) <= half[c](l, i)) ++hits;
          }
        }
        sgd_rate[i] = static_cast<double>(hits) /
                      (static_cast<double>(Ls) * static_cast<double>(L));
      }
      report.rows.push_back({id, "sgd_in_prediction", mean_of(sgd_rate),
                             sem_of(sgd_rate), Ls});
    }
  }
  return report;
}

namespace {

std::string render_double(double x) {
  // nlohmann's serializer emits the shortest digits that round-trip, which
  // keeps reports byte-stable and readable at once.
  return json(x).dump();
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace

void write_report_csv(const Report& report, std::ostream& out) {
  out << "config_id,metric,value,stderr,n_replicates\n";
  for (const auto& row : report.rows) {
    out << csv_escape(row.config_id) << ',' << csv_escape(row.metric) << ','
        << render_double(row.value) << ',' << render_double(row.stderr_of_value)
        << ',' << row.n_replicates << '\n';
  }
}

void write_report_json(const Report& report, std::ostream& out) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"config_id", row.config_id},
                    {"metric", row.metric},
                    {"value", row.value},
                    {"stderr", row.stderr_of_value},
                    {"n_replicates", row.n_replicates}});
  }
  out << json{{"rows", rows}}.dump(2) << '\n';
}

void write_report(const Report& report, std::ostream& out,
                  const std::string& format) {
  if (format == "csv") {
    write_report_csv(report, out);
  } else if (format == "json") {
    write_report_json(report, out);
  } else {
    throw DomainError("unknown report format '" + format + "'");
  }
}

}  // namespace higrad
