#pragma once

// JSON forms of the public types, used by the command-line tool and the
// experiment harness.
//
// Tree configuration:
//   {"K": 2, "B": [2, 2], "n": [4, 2, 1], "N": 16,
//    "weights": "optimal" | [w_0, ..., w_K]}        (weights optional)
//
// Interval:
//   {"center": ..., "se": ..., "lo": ..., "hi": ..., "level": ...,
//    "kind": "confidence" | "prediction", "degenerate": false}
//
// Synthetic generator:
//   {"model": "linear" | "logistic", "theta_star_kind": "null" | "dense" |
//    "sparse", "d": 10, "seed": 1}
//
// Experiment specification: see parse_experiment_spec below.

#include <cstdint>
#include <string>
#include <utility>

#include <json.hpp>

#include "higrad/data.hpp"
#include "higrad/experiments.hpp"
#include "higrad/inference.hpp"
#include "higrad/sgd.hpp"
#include "higrad/tree.hpp"

namespace higrad {

// Parses and validates a configuration object; "weights" defaults to
// "optimal".  Errors surface as the usual validation exceptions, plus
// ParseError for structural JSON problems.
std::pair<TreeConfig, WeightVector> config_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const TreeConfig& config,
                              const WeightVector& weights);

nlohmann::json interval_to_json(const IntervalResult& interval);

// Synthetic generator description.
struct GeneratorSpec {
  ModelKind model = ModelKind::linear;
  ThetaStarKind theta_star = ThetaStarKind::null_case;
  int d = 10;
  std::uint64_t seed = 1;
};

GeneratorSpec generator_from_json(const nlohmann::json& j);

// Experiment specification.  Recognized keys (all optional except "configs"
// when no default is wanted):
//   model, theta_star, d, n, replicates, sgd_replicates, test_points,
//   alpha, seed, step {c1, c2, exponent}, theta0 ("zeros" | "gaussian"),
//   theta0_scale, batch_size, burn_in, restart, configs.
// "configs" entries are either preset names (resolved at budget n) or
// configuration objects as above, optionally carrying an "id".  When
// "configs" is absent the experiment runs the single "default" preset.
// "step" defaults to the model's stock schedule.
ExperimentSpec parse_experiment_spec(const nlohmann::json& j);

// Convenience: read and parse a whole JSON file (IoError / ParseError).
nlohmann::json load_json_file(const std::string& path);

}  // namespace higrad
