#include "higrad/json_io.hpp"

#include <fstream>

#include "higrad/errors.hpp"

namespace higrad {

namespace {

using nlohmann::json;

const json& require_key(const json& j, const std::string& key) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError("missing key '" + key + "'");
  return *it;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& err) {
    throw ParseError("bad value for '" + key + "': " + err.what());
  }
}

}  // namespace

std::pair<TreeConfig, WeightVector> config_from_json(const json& j) {
  int depth = 0;
  std::vector<int> branching;
  std::vector<long long> lengths;
  long long total = 0;
  try {
    depth = require_key(j, "K").get<int>();
    branching = require_key(j, "B").get<std::vector<int>>();
    lengths = require_key(j, "n").get<std::vector<long long>>();
    total = require_key(j, "N").get<long long>();
  } catch (const json::exception& err) {
    throw ParseError(std::string("bad configuration JSON: ") + err.what());
  }
  TreeConfig config = validate_config(depth, std::move(branching),
                                      std::move(lengths), total);

  WeightVector weights;
  const json weights_json = j.value("weights", json("optimal"));
  if (weights_json.is_string()) {
    if (weights_json.get<std::string>() != "optimal") {
      throw ParseError("weights must be \"optimal\" or an array, got \"" +
                       weights_json.get<std::string>() + "\"");
    }
    weights = optimal_weights(config);
  } else if (weights_json.is_array()) {
    std::vector<double> values;
    try {
      values = weights_json.get<std::vector<double>>();
    } catch (const json::exception& err) {
      throw ParseError(std::string("bad weights array: ") + err.what());
    }
    weights = make_weights(config, std::move(values));
  } else {
    throw ParseError("weights must be \"optimal\" or an array");
  }
  return {std::move(config), std::move(weights)};
}

json config_to_json(const TreeConfig& config, const WeightVector& weights) {
  return json{{"K", config.depth},
              {"B", config.branching},
              {"n", config.segment_lengths},
              {"N", config.total},
              {"weights", weights.values},
              {"T", config.thread_count},
              {"L", thread_length(config)}};
}

json interval_to_json(const IntervalResult& interval) {
  return json{{"center", interval.center},
              {"se", interval.se},
              {"lo", interval.lo},
              {"hi", interval.hi},
              {"level", interval.level},
              {"kind", interval.kind == IntervalKind::prediction ? "prediction"
                                                                 : "confidence"},
              {"degenerate", interval.degenerate}};
}

GeneratorSpec generator_from_json(const json& j) {
  GeneratorSpec spec;
  spec.model = model_kind_from_name(get_or<std::string>(j, "model", "linear"));
  if (spec.model != ModelKind::linear && spec.model != ModelKind::logistic) {
    throw ParseError("generator model must be linear or logistic");
  }
  spec.theta_star =
      theta_star_kind_from_name(get_or<std::string>(j, "theta_star_kind", "null"));
  spec.d = get_or<int>(j, "d", 10);
  if (spec.d < 1) throw ParseError("generator dimension must be >= 1");
  spec.seed = get_or<std::uint64_t>(j, "seed", 1);
  return spec;
}

ExperimentSpec parse_experiment_spec(const json& j) {
  ExperimentSpec spec;
  spec.model = model_kind_from_name(get_or<std::string>(j, "model", "linear"));
  spec.theta_star =
      theta_star_kind_from_name(get_or<std::string>(j, "theta_star", "null"));
  spec.d = get_or<int>(j, "d", spec.d);
  spec.n = get_or<long long>(j, "n", spec.n);
  spec.replicates = get_or<int>(j, "replicates", spec.replicates);
  spec.sgd_replicates = get_or<int>(j, "sgd_replicates", spec.sgd_replicates);
  spec.test_points = get_or<int>(j, "test_points", spec.test_points);
  spec.alpha = get_or<double>(j, "alpha", spec.alpha);
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw ParseError("alpha must lie in (0, 1)");
  }

  if (j.is_object() && j.contains("step")) {
    const json& s = j.at("step");
    spec.step = make_schedule(get_or<double>(s, "c1", 0.1),
                              get_or<double>(s, "c2", 0.0),
                              get_or<double>(s, "exponent", 0.55));
  } else {
    spec.step = default_schedule(spec.model);
  }

  const std::string theta0 = get_or<std::string>(j, "theta0", "gaussian");
  if (theta0 == "gaussian") {
    spec.theta0_mode = Theta0Mode::gaussian;
  } else if (theta0 == "zeros") {
    spec.theta0_mode = Theta0Mode::zeros;
  } else {
    throw ParseError("theta0 must be \"gaussian\" or \"zeros\"");
  }
  spec.theta0_scale = get_or<double>(j, "theta0_scale", spec.theta0_scale);
  spec.batch_size = get_or<int>(j, "batch_size", spec.batch_size);
  spec.burn_in = get_or<long long>(j, "burn_in", spec.burn_in);
  spec.restart = get_or<bool>(j, "restart", spec.restart);

  json configs = json::array({"default"});
  if (j.is_object() && j.contains("configs")) {
    configs = j.at("configs");
    if (!configs.is_array() || configs.empty()) {
      throw ParseError("configs must be a non-empty array");
    }
  }
  int index = 0;
  for (const json& entry : configs) {
    NamedConfig named;
    if (entry.is_string()) {
      named.id = entry.get<std::string>();
      named.config = preset_config(named.id, spec.n);
      named.weights = optimal_weights(named.config);
    } else if (entry.is_object()) {
      auto [config, weights] = config_from_json(entry);
      named.config = std::move(config);
      named.weights = std::move(weights);
      named.id = get_or<std::string>(entry, "id",
                                     "config-" + std::to_string(index));
    } else {
      throw ParseError("config entries must be preset names or objects");
    }
    spec.configs.push_back(std::move(named));
    ++index;
  }
  return spec;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& err) {
    throw ParseError("'" + path + "': " + err.what());
  }
}

}  // namespace higrad
