#pragma once

// Experiment orchestration: trial-budget sweeps over repeated seeds, per-epoch
// metrics, summaries, and the per-figure experiment sets.
//
// Layout of one experiment directory (output_dir / name):
//   metrics.csv        one row per (K, seed, epoch)
//   summary.csv        best-epoch sampled test accuracy, mean/std over seeds
//   summary_final.csv  same for the final epoch
//   spec.json          fully resolved spec
//   VERSION            library version string
//   checkpoints/       final parameters of every (K, seed) run

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "psnn/checkpoint.hpp"
#include "psnn/config_io.hpp"
#include "psnn/errors.hpp"
#include "psnn/mnist.hpp"
#include "psnn/network.hpp"
#include "psnn/version.hpp"

namespace psnn {

struct ExperimentSpec {
  std::string name = "experiment";
  NetworkConfig network;
  std::vector<TrialBudget> trial_sweep{TrialBudget::finite(10)};
  /// When set, every sweep point also uses K for the output layer.
  bool sweep_output_trials = false;
  int repetitions = 3;
  std::filesystem::path output_dir = "runs";
  bool save_checkpoints = true;

  /// Configuration of one sweep point; repetition r uses seed network.seed + r.
  NetworkConfig point_config(const TrialBudget& k, int repetition) const {
    NetworkConfig c = network;
    c.hidden_trials = k;
    if (sweep_output_trials) c.output_trials = k;
    c.seed = network.seed + static_cast<std::uint64_t>(repetition);
    return c;
  }

  void validate() const {
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
      throw ConfigError("experiment name must be a non-empty plain file name");
    if (trial_sweep.empty()) throw ConfigError("experiment '" + name + "': trial_sweep is empty");
    if (repetitions < 1) throw ConfigError("experiment '" + name + "': repetitions must be >= 1");
    for (const auto& k : trial_sweep) point_config(k, 0).validate();
  }
};

inline Json to_json(const ExperimentSpec& s) {
  Json j;
  j["name"] = s.name;
  j["network"] = to_json(s.network);
  j["trial_sweep"] = Json::array();
  for (const auto& k : s.trial_sweep) j["trial_sweep"].push_back(trial_budget_to_json(k));
  j["sweep_output_trials"] = s.sweep_output_trials;
  j["repetitions"] = s.repetitions;
  j["output_dir"] = s.output_dir.string();
  j["save_checkpoints"] = s.save_checkpoints;
  return j;
}

inline ExperimentSpec experiment_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  ExperimentSpec s;
  try {
    s.name = j.value("name", s.name);
    if (j.contains("network")) update_from_json(s.network, j.at("network"));
    if (j.contains("trial_sweep")) {
      s.trial_sweep.clear();
      for (const auto& k : j.at("trial_sweep")) s.trial_sweep.push_back(trial_budget_from_json(k));
    }
    s.sweep_output_trials = j.value("sweep_output_trials", s.sweep_output_trials);
    s.repetitions = j.value("repetitions", s.repetitions);
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
    s.save_checkpoints = j.value("save_checkpoints", s.save_checkpoints);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
  return s;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec " + path.string());
  try {
    return experiment_spec_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_acc_sampled = 0.0;
  double test_acc_meanfield = 0.0;
};

struct RunResult {
  TrialBudget k = TrialBudget::infinite();
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;

  double best_accuracy() const {
    double best = 0.0;
    for (const auto& e : epochs) best = std::max(best, e.test_acc_sampled);
    return best;
  }
  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().test_acc_sampled; }
};

struct SummaryRow {
  TrialBudget k = TrialBudget::infinite();
  double acc_mean = 0.0;
  double acc_std = 0.0;
  int n_seeds = 0;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::filesystem::path directory;
  std::vector<RunResult> runs;  // sweep-major, repetition-minor
  std::vector<SummaryRow> summary;
  std::vector<SummaryRow> summary_final;
};

using ProgressLog = std::function<void(const std::string&)>;

struct RunOptions {
  unsigned jobs = 1;
  ProgressLog log;
};

/// Trains one network for config.epochs epochs, evaluating the test split
/// after every epoch in both modes. Returns the metrics and, via `trained`,
/// the final parameters.
inline RunResult train_and_evaluate(const NetworkConfig& config, const Dataset& train, const Dataset& test,
                                    Network* trained = nullptr, const ProgressLog& log = {},
                                    const std::string& label = {}) {
  Network net = init_network(config);
  RunResult r{config.hidden_trials, config.seed, {}};
  for (int e = 0; e < config.epochs; ++e) {
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.train_loss = train_epoch(net, train, e);
    rec.test_acc_sampled = evaluate(net, test, EvalMode::sampled, static_cast<std::uint64_t>(e));
    rec.test_acc_meanfield = evaluate(net, test, EvalMode::mean_field);
    r.epochs.push_back(rec);
    if (log) {
      char line[160];
      std::snprintf(line, sizeof line, "%s epoch %d loss %.4f acc %.4f mf %.4f", label.c_str(), rec.epoch,
                    rec.train_loss, rec.test_acc_sampled, rec.test_acc_meanfield);
      log(line);
    }
  }
  if (trained) *trained = std::move(net);
  return r;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline SummaryRow summarize(const TrialBudget& k, const std::vector<double>& acc) {
  SummaryRow s{k, 0.0, 0.0, static_cast<int>(acc.size())};
  for (double a : acc) s.acc_mean += a;
  s.acc_mean /= static_cast<double>(acc.size());
  if (acc.size() > 1) {
    double ss = 0.0;
    for (double a : acc) ss += (a - s.acc_mean) * (a - s.acc_mean);
    s.acc_std = std::sqrt(ss / static_cast<double>(acc.size() - 1));
  }
  return s;
}

inline std::string config_columns(const ExperimentSpec& spec) {
  const auto& c = spec.network;
  return spec.name + "," + std::string(c.neuron_model.name()) + "," + std::string(to_string(c.estimator.hidden_rule)) +
         "," + std::string(to_string(c.estimator.output_rule)) + "," + std::string(to_string(c.estimator.output_head));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

inline constexpr const char* kMetricsHeader =
    "experiment,neuron,hidden_rule,output_rule,output_head,K,seed,epoch,train_loss,test_acc_sampled,test_acc_meanfield";
inline constexpr const char* kSummaryHeader = "experiment,neuron,hidden_rule,output_rule,output_head,K,acc_mean,acc_std,n_seeds";

inline std::string metrics_csv(const ExperimentSpec& spec, const std::vector<RunResult>& runs) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  const std::string cols = detail::config_columns(spec);
  for (const auto& r : runs)
    for (const auto& e : r.epochs)
      out << cols << ',' << r.k.to_string() << ',' << r.seed << ',' << e.epoch << ',' << detail::fixed(e.train_loss, 8)
          << ',' << detail::fixed(e.test_acc_sampled, 6) << ',' << detail::fixed(e.test_acc_meanfield, 6) << '\n';
  return out.str();
}

inline std::string summary_csv(const ExperimentSpec& spec, const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << kSummaryHeader << '\n';
  const std::string cols = detail::config_columns(spec);
  for (const auto& s : rows)
    out << cols << ',' << s.k.to_string() << ',' << detail::fixed(s.acc_mean, 6) << ',' << detail::fixed(s.acc_std, 6)
        << ',' << s.n_seeds << '\n';
  return out.str();
}

/// Runs every (K, repetition) point of the spec, up to options.jobs at a
/// time, and writes the experiment directory. Output is independent of the
/// job count.
inline ExperimentResult run_train(const ExperimentSpec& spec, const Dataset& train, const Dataset& test,
                                  const RunOptions& options = {}) {
  spec.validate();
  for (const auto& w : spec.network.warnings())
    if (options.log) options.log("warning: " + spec.name + ": " + w);

  ExperimentResult result{spec, spec.output_dir / spec.name, {}, {}, {}};
  const std::size_t reps = static_cast<std::size_t>(spec.repetitions);
  const std::size_t n_jobs = spec.trial_sweep.size() * reps;
  result.runs.resize(n_jobs);
  std::filesystem::create_directories(result.directory);
  if (spec.save_checkpoints) std::filesystem::create_directories(result.directory / "checkpoints");

  std::mutex log_mutex;
  const ProgressLog log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(line);
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t j = next++; j < n_jobs; j = next++) {
      try {
        const TrialBudget& k = spec.trial_sweep[j / reps];
        const NetworkConfig cfg = spec.point_config(k, static_cast<int>(j % reps));
        const std::string label = spec.name + " K=" + k.to_string() + " seed=" + std::to_string(cfg.seed);
        Network net;
        result.runs[j] = train_and_evaluate(cfg, train, test, &net, log, label);
        if (spec.save_checkpoints)
          save_checkpoint(result.directory / "checkpoints" / ("K" + k.to_string() + "_seed" + std::to_string(cfg.seed) + ".ckpt"),
                          net, cfg.epochs);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_jobs;
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(n_jobs)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t p = 0; p < spec.trial_sweep.size(); ++p) {
    std::vector<double> best, last;
    for (std::size_t r = 0; r < reps; ++r) {
      best.push_back(result.runs[p * reps + r].best_accuracy());
      last.push_back(result.runs[p * reps + r].final_accuracy());
    }
    result.summary.push_back(detail::summarize(spec.trial_sweep[p], best));
    result.summary_final.push_back(detail::summarize(spec.trial_sweep[p], last));
  }

  detail::write_text(result.directory / "metrics.csv", metrics_csv(spec, result.runs));
  detail::write_text(result.directory / "summary.csv", summary_csv(spec, result.summary));
  detail::write_text(result.directory / "summary_final.csv", summary_csv(spec, result.summary_final));
  detail::write_text(result.directory / "spec.json", to_json(spec).dump(2) + "\n");
  detail::write_text(result.directory / "VERSION", std::string(kVersion) + "\n");
  return result;
}

enum class Figure { fig4, fig5, fig6, fig7, fig8a, fig8b };

inline std::string_view to_string(Figure f) {
  switch (f) {
    case Figure::fig4: return "FIG4";
    case Figure::fig5: return "FIG5";
    case Figure::fig6: return "FIG6";
    case Figure::fig7: return "FIG7";
    case Figure::fig8a: return "FIG8A";
    case Figure::fig8b: return "FIG8B";
  }
  return "?";
}

inline Figure parse_figure(std::string_view s) {
  for (Figure f : {Figure::fig4, Figure::fig5, Figure::fig6, Figure::fig7, Figure::fig8a, Figure::fig8b})
    if (s == to_string(f)) return f;
  throw ConfigError("unknown figure '" + std::string(s) + "' (expected FIG4, FIG5, FIG6, FIG7, FIG8A or FIG8B)");
}

/// Trial budgets swept by the figure suites.
inline std::vector<TrialBudget> default_trial_sweep() {
  std::vector<TrialBudget> ks;
  for (std::uint32_t k : {1u, 2u, 3u, 5u, 7u, 10u}) ks.push_back(TrialBudget::finite(k));
  return ks;
}

/// Learning rates used by the figure suites, per output head.
inline constexpr double kSoftmaxLearningRate = 0.5;
inline constexpr double kLinearLearningRate = 0.1;

/// Shared settings for a figure suite; network fields other than neuron,
/// estimator, head, depth and budgets are taken from `base`.
struct FigureOptions {
  NetworkConfig base;
  int repetitions = 3;
  std::filesystem::path output_dir = "runs";
  std::vector<TrialBudget> trial_sweep = default_trial_sweep();
  /// Overrides the per-head learning rates when set.
  std::optional<double> learning_rate;
};

/// The experiment set behind one figure, with estimator combinations as in
/// its legend. EG-hidden entries drop K = 1, where their gradient vanishes.
inline std::vector<ExperimentSpec> figure_specs(Figure fig, const FigureOptions& opt) {
  struct Entry {
    std::string name;
    NeuronModel model;
    GradientRule hidden, output;
    OutputHead head;
    bool sample_output;
    bool two_hidden;
  };
  const auto sm = OutputHead::softmax_ce;
  const auto lin = OutputHead::linear_mse;
  const auto tp = GradientRule::tp, eg = GradientRule::eg, st = GradientRule::st;
  const NeuronModel set = NeuronModel::set();
  std::vector<Entry> entries;
  switch (fig) {
    case Figure::fig4:
      entries = {{"SPD_TP_TP", NeuronModel::spd(), tp, tp, sm, false, false},
                 {"SET_TP_TP", set, tp, tp, sm, false, false},
                 {"TSP_TP_TP", NeuronModel::tsp(), tp, tp, sm, false, false}};
      break;
    case Figure::fig5:
      entries = {{"TP_TP", set, tp, tp, sm, false, false},
                 {"EG_TP", set, eg, tp, sm, false, false},
                 {"EG_EG", set, eg, eg, sm, true, false}};
      break;
    case Figure::fig6:
      entries = {{"TP_TP", set, tp, tp, sm, false, false},
                 {"ST_TP", set, st, tp, sm, false, false},
                 {"ST_EG", set, st, eg, sm, true, false},
                 {"ST_ST", set, st, st, sm, true, false},
                 {"EG_ST", set, eg, st, sm, true, false}};
      break;
    case Figure::fig7:
      entries = {{"TP_TP_inf", set, tp, tp, sm, false, false},
                 {"EG_TP_inf", set, eg, tp, sm, false, false},
                 {"TP_EG_sampled", set, tp, eg, sm, true, false},
                 {"EG_EG_sampled", set, eg, eg, sm, true, false}};
      break;
    case Figure::fig8a:
    case Figure::fig8b: {
      const bool deep = fig == Figure::fig8b;
      entries = {{"TP_softmax", set, tp, tp, sm, false, deep},
                 {"EG_softmax", set, eg, tp, sm, false, deep},
                 {"TP_linear", set, tp, tp, lin, false, deep},
                 {"EG_linear", set, eg, tp, lin, false, deep}};
      break;
    }
  }

  std::vector<ExperimentSpec> specs;
  for (const auto& e : entries) {
    ExperimentSpec s;
    s.name = e.name;
    s.network = opt.base;
    s.network.neuron_model = e.model;
    s.network.estimator.hidden_rule = e.hidden;
    s.network.estimator.output_rule = e.output;
    s.network.estimator.output_head = e.head;
    s.network.output_trials = TrialBudget::infinite();
    const Eigen::Index in = opt.base.layer_dims.front(), width = opt.base.layer_dims[1],
                       classes = opt.base.layer_dims.back();
    s.network.layer_dims = e.two_hidden ? std::vector<Eigen::Index>{in, width, width, classes}
                                        : std::vector<Eigen::Index>{in, width, classes};
    s.network.learning_rate =
        opt.learning_rate.value_or(e.head == lin ? kLinearLearningRate : kSoftmaxLearningRate);
    s.sweep_output_trials = e.sample_output;
    s.trial_sweep.clear();
    for (const auto& k : opt.trial_sweep)
      if (!(e.hidden == eg && k == TrialBudget::finite(1))) s.trial_sweep.push_back(k);
    s.repetitions = opt.repetitions;
    s.output_dir = opt.output_dir / std::string(to_string(fig));
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace psnn
