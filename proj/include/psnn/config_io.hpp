#pragma once

// JSON encoding of network configurations.
//
//   {
//     "layer_dims": [784, 400, 10],
//     "neuron": "SET",                  // SPD | SET | TSP
//     "tsp": {"t": 0.21, "gamma": 0.02, "kappa": 30.0, "zeta": 10.7},
//     "hidden_rule": "TP",              // TP | EG | ST
//     "output_rule": "TP",
//     "output_head": "SOFTMAX_CE",      // SOFTMAX_CE | LINEAR_MSE
//     "smoothing_epsilon": 1e-12,
//     "hidden_trials": 10,              // positive integer or "inf"
//     "output_trials": "inf",
//     "seed": 1, "learning_rate": 0.5, "batch_size": 128, "epochs": 20
//   }
//
// Every key is optional when decoding; missing keys keep the value already
// present in the config being updated.

#include <string>

#include <nlohmann/json.hpp>

#include "psnn/errors.hpp"
#include "psnn/network.hpp"

namespace psnn {

using Json = nlohmann::json;

inline Json trial_budget_to_json(const TrialBudget& b) {
  return b.is_finite() ? Json(b.trials()) : Json("inf");
}

inline TrialBudget trial_budget_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return TrialBudget::infinite();
    throw ConfigError("trial budget must be a positive integer or \"inf\"");
  }
  if (!j.is_number_integer() || j.get<long long>() < 1)
    throw ConfigError("trial budget must be a positive integer or \"inf\"");
  return TrialBudget::finite(j.get<std::uint32_t>());
}

inline Json to_json(const NetworkConfig& c) {
  Json j;
  j["layer_dims"] = c.layer_dims;
  j["neuron"] = std::string(c.neuron_model.name());
  if (c.neuron_model.kind() == NeuronKind::tsp) {
    const TspParams& p = c.neuron_model.tsp_params();
    j["tsp"] = {{"t", p.t}, {"gamma", p.gamma}, {"kappa", p.kappa}, {"zeta", p.zeta}};
  }
  j["hidden_rule"] = std::string(to_string(c.estimator.hidden_rule));
  j["output_rule"] = std::string(to_string(c.estimator.output_rule));
  j["output_head"] = std::string(to_string(c.estimator.output_head));
  j["smoothing_epsilon"] = c.estimator.smoothing_epsilon;
  j["hidden_trials"] = trial_budget_to_json(c.hidden_trials);
  j["output_trials"] = trial_budget_to_json(c.output_trials);
  j["seed"] = c.seed;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  return j;
}

/// Overlays the keys present in `j` onto `c`. Type errors surface as ConfigError.
inline void update_from_json(NetworkConfig& c, const Json& j) {
  if (!j.is_object()) throw ConfigError("network configuration must be a JSON object");
  try {
    if (j.contains("layer_dims")) c.layer_dims = j.at("layer_dims").get<std::vector<Eigen::Index>>();
    if (j.contains("neuron") || j.contains("tsp")) {
      const NeuronKind kind =
          j.contains("neuron") ? parse_neuron_kind(j.at("neuron").get<std::string>()) : c.neuron_model.kind();
      TspParams p = c.neuron_model.tsp_params();
      if (j.contains("tsp")) {
        const Json& t = j.at("tsp");
        p.t = t.value("t", p.t);
        p.gamma = t.value("gamma", p.gamma);
        p.kappa = t.value("kappa", p.kappa);
        p.zeta = t.value("zeta", p.zeta);
      }
      c.neuron_model = NeuronModel::of_kind(kind, p);
    }
    if (j.contains("hidden_rule")) c.estimator.hidden_rule = parse_gradient_rule(j.at("hidden_rule").get<std::string>());
    if (j.contains("output_rule")) c.estimator.output_rule = parse_gradient_rule(j.at("output_rule").get<std::string>());
    if (j.contains("output_head")) c.estimator.output_head = parse_output_head(j.at("output_head").get<std::string>());
    if (j.contains("smoothing_epsilon")) c.estimator.smoothing_epsilon = j.at("smoothing_epsilon").get<double>();
    if (j.contains("hidden_trials")) c.hidden_trials = trial_budget_from_json(j.at("hidden_trials"));
    if (j.contains("output_trials")) c.output_trials = trial_budget_from_json(j.at("output_trials"));
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("network configuration: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("network configuration: ") + e.what());
  }
}

inline NetworkConfig network_config_from_json(const Json& j) {
  NetworkConfig c;
  update_from_json(c, j);
  return c;
}

}  // namespace psnn
