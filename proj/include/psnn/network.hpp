#pragma once

// Stochastic feedforward network: dense layers of physical stochastic
// neurons, a softmax or linear output head, sampled forward passes under a
// trial budget and estimator-driven backward passes.
//
// Batches are column-major: every matrix holds one sample per column. Each
// sample owns its random stream, so a sample's draws do not depend on which
// batch it lands in or on the batch size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psnn/errors.hpp"
#include "psnn/estimators.hpp"
#include "psnn/mnist.hpp"
#include "psnn/neuron_models.hpp"
#include "psnn/random.hpp"

namespace psnn {

/// Number of physical trials averaged per neuron evaluation; 0 encodes the
/// infinite-trial limit where the activation is the probability itself.
class TrialBudget {
 public:
  static TrialBudget finite(std::uint32_t k) {
    if (k == 0) throw ConfigError("TrialBudget: K must be >= 1");
    return TrialBudget(k);
  }
  static TrialBudget infinite() { return TrialBudget(0); }

  bool is_finite() const { return k_ != 0; }
  std::uint32_t trials() const { return k_; }
  std::string to_string() const { return is_finite() ? std::to_string(k_) : "inf"; }

  friend bool operator==(const TrialBudget&, const TrialBudget&) = default;

 private:
  explicit TrialBudget(std::uint32_t k) : k_(k) {}
  std::uint32_t k_;
};

struct NetworkConfig {
  std::vector<Eigen::Index> layer_dims{784, 400, 10};
  NeuronModel neuron_model = NeuronModel::set();
  TrialBudget hidden_trials = TrialBudget::finite(10);
  TrialBudget output_trials = TrialBudget::infinite();
  EstimatorConfig estimator;
  std::uint64_t seed = 1;
  double learning_rate = 0.001;
  std::size_t batch_size = 128;
  int epochs = 20;

  std::size_t hidden_layer_count() const { return layer_dims.size() - 2; }
  Eigen::Index class_count() const { return layer_dims.back(); }

  void validate() const {
    if (layer_dims.size() < 3) throw ConfigError("NetworkConfig: need at least one hidden layer");
    for (auto d : layer_dims)
      if (d <= 0) throw ConfigError("NetworkConfig: layer dimensions must be positive");
    estimator.validate(neuron_model);
    if (estimator.output_head == OutputHead::linear_mse) {
      if (output_trials.is_finite())
        throw ConfigError("NetworkConfig: the LINEAR_MSE head is deterministic; output trials must be inf");
      if (estimator.output_rule != GradientRule::tp)
        throw ConfigError("NetworkConfig: the LINEAR_MSE head only supports the TP output rule");
    }
    if (!(std::isfinite(learning_rate) && learning_rate >= 0))
      throw ConfigError("NetworkConfig: learning rate must be finite and >= 0");
    if (batch_size == 0) throw ConfigError("NetworkConfig: batch size must be >= 1");
    if (epochs < 1) throw ConfigError("NetworkConfig: epochs must be >= 1");
  }

  /// Legal but degenerate settings worth telling the user about.
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (estimator.hidden_rule == GradientRule::eg && hidden_trials.is_finite() && hidden_trials.trials() == 1)
      w.emplace_back("EG hidden rule with K=1: every empirical activation is 0 or 1, hidden gradients vanish");
    return w;
  }
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out_dim x in_dim
  Eigen::VectorXd bias;     // out_dim

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct Network {
  NetworkConfig config;
  std::vector<DenseLayer> layers;

  bool is_output_layer(std::size_t l) const { return l + 1 == layers.size(); }
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline Network init_network(const NetworkConfig& config) {
  config.validate();
  Network net{config, {}};
  RandomStream rng = derive_stream(config.seed, StreamPurpose::init);
  for (std::size_t l = 0; l + 1 < config.layer_dims.size(); ++l) {
    const Eigen::Index in = config.layer_dims[l];
    const Eigen::Index out = config.layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

/// What a forward pass samples and which quantities it keeps for backward.
struct ForwardOptions {
  EstimatorConfig estimator;
  TrialBudget hidden_trials = TrialBudget::infinite();
  TrialBudget output_trials = TrialBudget::infinite();
  bool record = true;

  static ForwardOptions training(const NetworkConfig& c) {
    return {c.estimator, c.hidden_trials, c.output_trials, true};
  }
  static ForwardOptions sampled(const NetworkConfig& c) {
    return {c.estimator, c.hidden_trials, c.output_trials, false};
  }
  static ForwardOptions mean_field(const NetworkConfig& c) {
    return {c.estimator, TrialBudget::infinite(), TrialBudget::infinite(), false};
  }
};

/// Per-layer record. pre_activation is kept for TP layers (backward needs
/// p'(z)); probability whenever TP needs it or no sampling happened;
/// empirical whenever the layer was sampled.
struct LayerTrace {
  std::optional<Eigen::MatrixXd> pre_activation;
  std::optional<Eigen::MatrixXd> probability;
  std::optional<Eigen::MatrixXd> empirical;

  /// What the next layer actually saw.
  const Eigen::MatrixXd& activation() const {
    if (empirical) return *empirical;
    if (probability) return *probability;
    if (pre_activation) return *pre_activation;
    throw ContractError("LayerTrace: no activation recorded");
  }
};

struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<LayerTrace> layers;
  Eigen::MatrixXd output;  // phat, p or linear outputs, one column per sample
  ForwardOptions options;
};

namespace detail {

inline void require_finite_layer(const Eigen::MatrixXd& z, std::size_t layer) {
  if (!z.allFinite())
    throw NumericError("forward: non-finite pre-activation in layer " + std::to_string(layer) +
                       " (weights diverged?)");
}

// Counts of `trials` categorical draws from each column of `p`, divided by trials.
inline Eigen::MatrixXd multinomial_frequencies(const Eigen::MatrixXd& p, std::uint32_t trials,
                                               std::span<RandomStream> streams) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.rows(), p.cols());
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    RandomStream& rng = streams[static_cast<std::size_t>(c)];
    for (std::uint32_t k = 0; k < trials; ++k) {
      const double u = uniform01(rng);
      double cdf = 0.0;
      Eigen::Index cls = p.rows() - 1;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        cdf += p(r, c);
        if (u < cdf) {
          cls = r;
          break;
        }
      }
      out(cls, c) += 1.0;
    }
  }
  return out / static_cast<double>(trials);
}

}  // namespace detail

/// Forward pass over a batch (one column per sample). `streams` must hold one
/// stream per column whenever any layer is sampled.
inline ForwardTrace forward(const Network& net, const Eigen::MatrixXd& inputs, std::span<RandomStream> streams,
                            const ForwardOptions& options) {
  const auto& cfg = net.config;
  if (inputs.rows() != cfg.layer_dims.front())
    throw ShapeError("forward: input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                     std::to_string(cfg.layer_dims.front()));
  const bool sampling = options.hidden_trials.is_finite() || options.output_trials.is_finite();
  if (sampling && streams.size() != static_cast<std::size_t>(inputs.cols()))
    throw ShapeError("forward: need one random stream per sample");

  ForwardTrace trace{inputs, {}, {}, options};
  trace.layers.resize(net.layers.size());
  const EstimatorConfig& est = options.estimator;

  const Eigen::MatrixXd* h = &trace.input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    Eigen::MatrixXd z = layer.weights * *h;
    z.colwise() += layer.bias;
    detail::require_finite_layer(z, l);
    LayerTrace& rec = trace.layers[l];

    if (!net.is_output_layer(l)) {
      const NeuronModel& model = cfg.neuron_model;
      Eigen::MatrixXd p = z.unaryExpr([&model](double v) { return model.probability(v); });
      const bool tp = est.hidden_rule == GradientRule::tp;
      if (options.hidden_trials.is_finite()) {
        const std::uint32_t k = options.hidden_trials.trials();
        Eigen::MatrixXd hhat(p.rows(), p.cols());
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
          RandomStream& rng = streams[static_cast<std::size_t>(c)];
          for (Eigen::Index r = 0; r < p.rows(); ++r)
            hhat(r, c) = static_cast<double>(bernoulli_count(p(r, c), k, rng)) / static_cast<double>(k);
        }
        rec.empirical = std::move(hhat);
        if (tp && options.record) rec.probability = std::move(p);
      } else {
        rec.probability = std::move(p);
      }
      if (tp && options.record) rec.pre_activation = std::move(z);
      h = &rec.activation();
      continue;
    }

    if (est.output_head == OutputHead::linear_mse) {
      trace.output = z;
      rec.pre_activation = std::move(z);
      break;
    }
    Eigen::MatrixXd p = softmax(z);
    if (options.output_trials.is_finite()) {
      rec.empirical = detail::multinomial_frequencies(p, options.output_trials.trials(), streams);
      trace.output = *rec.empirical;
      if (est.output_rule == GradientRule::tp && options.record) rec.probability = std::move(p);
    } else {
      trace.output = p;
      rec.probability = std::move(p);
    }
  }
  return trace;
}

/// Single-sample convenience overload.
inline ForwardTrace forward(const Network& net, const Eigen::VectorXd& input, RandomStream& rng,
                            const ForwardOptions& options) {
  return forward(net, Eigen::MatrixXd(input), std::span<RandomStream>(&rng, 1), options);
}

inline ForwardTrace forward(const Network& net, const Eigen::VectorXd& input, RandomStream& rng) {
  return forward(net, input, rng, ForwardOptions::training(net.config));
}

namespace detail {

inline const Eigen::MatrixXd& require_field(const std::optional<Eigen::MatrixXd>& field, const char* name,
                                            std::size_t layer) {
  if (!field)
    throw ContractError(std::string("backward: trace lacks ") + name + " for layer " + std::to_string(layer) +
                        " required by the configured rule");
  return *field;
}

}  // namespace detail

/// Backward pass. dL_dW = dL_dz h^T averaged over the batch, where h is the
/// activation the layer actually received during the forward pass.
inline std::vector<LayerGradSignal> backward(const Network& net, const ForwardTrace& trace,
                                             const Eigen::MatrixXd& targets, const EstimatorConfig& estimator) {
  if (!(trace.options.estimator == estimator) || !trace.options.record)
    throw ContractError("backward: trace was not recorded under this estimator configuration");
  const std::size_t n_layers = net.layers.size();
  if (trace.layers.size() != n_layers) throw ContractError("backward: trace depth does not match network");
  if (targets.rows() != net.config.class_count() || targets.cols() != trace.input.cols())
    throw ShapeError("backward: targets must be class_count x batch");

  const std::size_t out = n_layers - 1;
  const LayerTrace& out_rec = trace.layers[out];
  Eigen::MatrixXd g;
  if (estimator.output_head == OutputHead::linear_mse) {
    g = output_backward_linear_mse(trace.output, targets, targets.rows());
  } else {
    switch (estimator.output_rule) {
      case GradientRule::tp:
        g = output_backward_softmax_tp(detail::require_field(out_rec.probability, "probability", out), targets);
        break;
      case GradientRule::eg:
        g = output_backward_softmax_eg(smooth_probs(trace.output, estimator.smoothing_epsilon), targets);
        break;
      case GradientRule::st:
        g = output_backward_softmax_st(trace.output, targets);
        break;
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(trace.input.cols());
  std::vector<LayerGradSignal> grads(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const Eigen::MatrixXd& h_prev = l == 0 ? trace.input : trace.layers[l - 1].activation();
    LayerGradSignal& gs = grads[l];
    gs.dL_dW = (g * h_prev.transpose()) * inv_batch;
    gs.dL_db = g.rowwise().sum() * inv_batch;
    if (l == 0) {
      gs.dL_dz = std::move(g);
      break;
    }
    Eigen::MatrixXd upstream = net.layers[l].weights.transpose() * g;
    gs.dL_dz = std::move(g);
    const LayerTrace& rec = trace.layers[l - 1];
    switch (estimator.hidden_rule) {
      case GradientRule::tp:
        g = hidden_backward_tp(net.config.neuron_model, detail::require_field(rec.pre_activation, "pre_activation", l - 1),
                               upstream);
        break;
      case GradientRule::eg:
        g = hidden_backward_eg(rec.activation(), upstream);
        break;
      case GradientRule::st:
        g = hidden_backward_st(upstream);
        break;
    }
  }
  return grads;
}

/// Mean loss over the columns of `output`. CE uses the smoothed output, so it
/// stays finite when the target class was never sampled.
inline double loss(const Eigen::MatrixXd& output, const Eigen::MatrixXd& targets, OutputHead head,
                   double smoothing_epsilon = kDefaultSmoothingEpsilon) {
  detail::require_same_shape(output, targets, "loss");
  if (head == OutputHead::linear_mse)
    return (output - targets).squaredNorm() / static_cast<double>(output.size());
  const Eigen::MatrixXd ps = smooth_probs(output, smoothing_epsilon);
  return -(targets.array() * ps.array().log()).sum() / static_cast<double>(output.cols());
}

/// W <- W - lr dL_dW, b <- b - lr dL_db. The step is rejected as a whole if
/// any gradient is non-finite.
inline void sgd_step(Network& net, const std::vector<LayerGradSignal>& grads, double lr) {
  if (grads.size() != net.layers.size()) throw ShapeError("sgd_step: one gradient per layer expected");
  for (std::size_t l = 0; l < grads.size(); ++l) {
    const auto& layer = net.layers[l];
    if (grads[l].dL_dW.rows() != layer.weights.rows() || grads[l].dL_dW.cols() != layer.weights.cols() ||
        grads[l].dL_db.size() != layer.bias.size())
      throw ShapeError("sgd_step: gradient shape mismatch in layer " + std::to_string(l));
    if (!grads[l].dL_dW.allFinite() || !grads[l].dL_db.allFinite())
      throw NumericError("sgd_step: non-finite gradient in layer " + std::to_string(l) + "; step aborted");
  }
  if (lr == 0.0) return;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    net.layers[l].weights.noalias() -= lr * grads[l].dL_dW;
    net.layers[l].bias.noalias() -= lr * grads[l].dL_db;
  }
}

enum class EvalMode { sampled, mean_field };

/// Samples evaluated per forward call in evaluate().
inline constexpr std::size_t kEvalChunk = 1000;

/// Classification accuracy. SAMPLED uses the configured trial budgets with
/// streams keyed by (seed, eval, tag, sample index); MEAN_FIELD evaluates
/// every layer in the infinite-trial limit and uses no randomness.
inline double evaluate(const Network& net, const Dataset& data, EvalMode mode, std::uint64_t tag = 0) {
  if (data.empty()) throw DomainError("evaluate: empty dataset");
  const ForwardOptions options =
      mode == EvalMode::sampled ? ForwardOptions::sampled(net.config) : ForwardOptions::mean_field(net.config);
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  std::vector<RandomStream> streams;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::size_t stop = std::min(data.size(), start + kEvalChunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    streams.clear();
    if (mode == EvalMode::sampled)
      for (std::size_t i : idx) streams.push_back(derive_stream(net.config.seed, StreamPurpose::eval, {tag, i}));
    const ForwardTrace t = forward(net, data.images(idx), streams, options);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      Eigen::Index pred = 0;
      t.output.col(static_cast<Eigen::Index>(c)).maxCoeff(&pred);
      if (pred == data.labels()[idx[c]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// One epoch of minibatch SGD. Batch order comes from (seed, shuffle, epoch);
/// sample streams from (seed, train, epoch, batch, position). Returns the
/// mean training loss over batches.
inline double train_epoch(Network& net, const Dataset& data, int epoch) {
  const auto& cfg = net.config;
  if (data.empty()) throw DomainError("train_epoch: empty dataset");
  RandomStream shuffle = derive_stream(cfg.seed, StreamPurpose::shuffle, {static_cast<std::uint64_t>(epoch)});
  const auto plan = batches(data, cfg.batch_size, shuffle);
  const ForwardOptions options = ForwardOptions::training(cfg);
  double total = 0.0;
  std::vector<RandomStream> streams;
  for (std::size_t b = 0; b < plan.size(); ++b) {
    streams.clear();
    for (std::size_t i = 0; i < plan[b].size(); ++i)
      streams.push_back(derive_stream(cfg.seed, StreamPurpose::train, {static_cast<std::uint64_t>(epoch), b, i}));
    const Eigen::MatrixXd y = data.targets(plan[b]);
    const ForwardTrace trace = forward(net, data.images(plan[b]), streams, options);
    total += loss(trace.output, y, cfg.estimator.output_head, cfg.estimator.smoothing_epsilon);
    sgd_step(net, backward(net, trace, y, cfg.estimator), cfg.learning_rate);
  }
  return total / static_cast<double>(plan.size());
}

}  // namespace psnn
