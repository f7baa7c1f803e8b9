// psnn: train stochastic physical-neuron networks on MNIST, run the figure
// sweeps, validate the physics oracles and evaluate checkpoints.
//
// Exit codes: 0 success, 1 internal error, 2 config error, 3 data error,
// 4 physics validation failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "psnn/checkpoint.hpp"
#include "psnn/experiment.hpp"
#include "psnn/mnist.hpp"
#include "psnn/validation.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kPhysics = 4 };

struct Common {
  std::string data_dir;
  std::string out_dir;
  std::string manifest;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> repetitions;
  std::vector<std::string> trials;
  bool quiet = false;
};

std::string default_data_dir() {
  if (const char* env = std::getenv("PSNN_DATA_DIR")) return env;
  return "data/mnist";
}

void add_common(CLI::App* cmd, Common& c, bool training) {
  cmd->add_option("--data-dir", c.data_dir, "Directory with the MNIST IDX files (plain or .gz)")
      ->default_str(default_data_dir());
  if (!training) return;
  cmd->add_option("--out-dir", c.out_dir, "Root directory for experiment outputs");
  cmd->add_option("--manifest", c.manifest, "Verify the data against a sha256 manifest before running");
  cmd->add_option("--jobs", c.jobs, "Sweep points trained in parallel")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Base seed; repetition r uses seed + r");
  cmd->add_option("--epochs", c.epochs, "Training epochs per run")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", c.lr, "SGD learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--repetitions", c.repetitions, "Seeds per sweep point")->check(CLI::PositiveNumber);
  cmd->add_option("--trials", c.trials, "Trial sweep, e.g. --trials 1 2 5 10 inf");
  cmd->add_flag("-q,--quiet", c.quiet, "No per-epoch progress on stderr");
}

std::vector<psnn::TrialBudget> parse_trials(const std::vector<std::string>& items) {
  std::vector<psnn::TrialBudget> ks;
  for (const auto& s : items) {
    if (s == "inf") {
      ks.push_back(psnn::TrialBudget::infinite());
      continue;
    }
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 1) throw psnn::ConfigError("--trials: '" + s + "' is not a positive integer or inf");
    ks.push_back(psnn::TrialBudget::finite(static_cast<std::uint32_t>(v)));
  }
  return ks;
}

struct Data {
  psnn::Dataset train;
  psnn::Dataset test;
};

Data load_data(const Common& c) {
  const fs::path dir = c.data_dir.empty() ? default_data_dir() : c.data_dir;
  if (!c.manifest.empty()) {
    const auto problems = psnn::verify_digests(dir, psnn::parse_digest_manifest(c.manifest));
    if (!problems.empty()) {
      std::string msg = "digest verification failed:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw psnn::FormatError(msg);
    }
  }
  return {psnn::load_mnist(dir, psnn::Split::train), psnn::load_mnist(dir, psnn::Split::test)};
}

psnn::RunOptions run_options(const Common& c) {
  psnn::RunOptions o;
  o.jobs = c.jobs;
  if (!c.quiet) o.log = [](const std::string& line) { std::cerr << line << std::endl; };
  return o;
}

void print_summary(const psnn::ExperimentResult& r) {
  std::cout << r.directory.string() << '\n';
  for (const auto& s : r.summary)
    std::printf("  %-16s K=%-4s acc %.4f +- %.4f (n=%d)\n", r.spec.name.c_str(), s.k.to_string().c_str(), s.acc_mean,
                s.acc_std, s.n_seeds);
}

int cmd_train(const std::string& spec_path, const Common& c) {
  psnn::ExperimentSpec spec = psnn::load_experiment_spec(spec_path);
  if (!c.out_dir.empty()) spec.output_dir = c.out_dir;
  if (c.seed) spec.network.seed = *c.seed;
  if (c.epochs) spec.network.epochs = *c.epochs;
  if (c.lr) spec.network.learning_rate = *c.lr;
  if (c.repetitions) spec.repetitions = *c.repetitions;
  if (!c.trials.empty()) spec.trial_sweep = parse_trials(c.trials);
  spec.validate();
  const Data d = load_data(c);
  print_summary(psnn::run_train(spec, d.train, d.test, run_options(c)));
  return kOk;
}

int cmd_figure(const std::string& name, const Common& c) {
  const psnn::Figure fig = psnn::parse_figure(name);
  psnn::FigureOptions opt;
  if (!c.out_dir.empty()) opt.output_dir = c.out_dir;
  if (c.seed) opt.base.seed = *c.seed;
  if (c.epochs) opt.base.epochs = *c.epochs;
  if (c.repetitions) opt.repetitions = *c.repetitions;
  if (!c.trials.empty()) opt.trial_sweep = parse_trials(c.trials);
  opt.learning_rate = c.lr;
  const auto specs = psnn::figure_specs(fig, opt);
  for (const auto& s : specs) s.validate();
  const Data d = load_data(c);
  for (const auto& s : specs) print_summary(psnn::run_train(s, d.train, d.test, run_options(c)));
  return kOk;
}

int cmd_physics(const std::string& curves, std::uint64_t seed) {
  psnn::PhysicsValidationOptions opt;
  opt.seed = seed;
  const psnn::PhysicsReport rep = psnn::run_physics_validation(opt);
  psnn::print_physics_report(std::cout, rep);
  if (!curves.empty()) {
    std::ofstream out(curves);
    if (!out) throw psnn::Error("cannot write " + curves);
    psnn::write_activation_curves(out, 401, opt.tsp);
    std::cout << "activation curves written to " << curves << '\n';
  }
  return rep.passed() ? kOk : kPhysics;
}

int cmd_eval(const std::string& path, const Common& c, std::optional<std::uint64_t> tag) {
  const psnn::Checkpoint ck = psnn::load_checkpoint(path);
  const fs::path dir = c.data_dir.empty() ? default_data_dir() : c.data_dir;
  const psnn::Dataset test = psnn::load_mnist(dir, psnn::Split::test);
  const auto& cfg = ck.network.config;
  const double sampled = psnn::evaluate(ck.network, test, psnn::EvalMode::sampled,
                                        tag.value_or(static_cast<std::uint64_t>(std::max(0, ck.epochs_completed - 1))));
  const double mf = psnn::evaluate(ck.network, test, psnn::EvalMode::mean_field);
  std::printf("neuron %s hidden %s output %s head %s K %s epochs %d\n", std::string(cfg.neuron_model.name()).c_str(),
              std::string(psnn::to_string(cfg.estimator.hidden_rule)).c_str(),
              std::string(psnn::to_string(cfg.estimator.output_rule)).c_str(),
              std::string(psnn::to_string(cfg.estimator.output_head)).c_str(), cfg.hidden_trials.to_string().c_str(),
              ck.epochs_completed);
  std::printf("test_acc_sampled %.6f\ntest_acc_meanfield %.6f\n", sampled, mf);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-aware training of stochastic physical-neuron networks"};
  app.require_subcommand(1);

  Common train_opts, figure_opts, eval_opts;
  std::string spec_path, figure_name, curves, checkpoint_path;
  std::uint64_t physics_seed = 1;
  std::optional<std::uint64_t> eval_tag;

  auto* train = app.add_subcommand("train", "Run an experiment spec (JSON)");
  train->add_option("spec", spec_path, "Experiment spec file")->required()->check(CLI::ExistingFile);
  add_common(train, train_opts, true);

  auto* figure = app.add_subcommand("figure", "Run the experiment set of one figure");
  figure->add_option("figure", figure_name, "FIG4, FIG5, FIG6, FIG7, FIG8A or FIG8B")->required();
  add_common(figure, figure_opts, true);

  auto* physics = app.add_subcommand("physics-validate", "Check closed-form activations against the oracles");
  physics->add_option("--curves", curves, "Write p(z) curves to this CSV file");
  physics->add_option("--seed", physics_seed, "Seed for the Monte-Carlo oracles");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--tag", eval_tag, "Evaluation stream tag (default: last epoch index)");
  add_common(eval, eval_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (train->parsed()) return cmd_train(spec_path, train_opts);
    if (figure->parsed()) return cmd_figure(figure_name, figure_opts);
    if (physics->parsed()) return cmd_physics(curves, physics_seed);
    if (eval->parsed()) return cmd_eval(checkpoint_path, eval_opts, eval_tag);
  } catch (const psnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const psnn::FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const psnn::PhysicsViolationError& e) {
    std::cerr << "physics violation: " << e.what() << '\n';
    return kPhysics;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
