// bltune: command line front end for tuning, experiment grids, worst-case
// sweeps, attacks and a quick oracle self-check.
//
// Exit status: 0 on success, 1 for bad arguments, configs or data, 2 when a
// solver or an invariant check fails.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bltune/attack.hpp"
#include "bltune/bilevel.hpp"
#include "bltune/config.hpp"
#include "bltune/dataset.hpp"
#include "bltune/error.hpp"
#include "bltune/harness.hpp"
#include "checks.hpp"

namespace {

using namespace bltune;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ParseError:
    case ErrorCode::MissingLabelColumn:
    case ErrorCode::SingleClassData:
    case ErrorCode::InsufficientSamples:
      return kConfigError;
    default:
      return kSolverError;
  }
}

struct DataOptions {
  std::string path;
  std::string label_column = "class";
  std::string positive_label = "malignant";
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  double test_fraction = 0.5;
  std::uint64_t seed = 0;
  bool raw = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--data", path, "CSV file with a header row")->required();
    cmd.add_option("--label-column", label_column, "Name of the label column")->capture_default_str();
    cmd.add_option("--positive-label", positive_label, "Label value mapped to +1")->capture_default_str();
    cmd.add_option("--train-size", train_size, "Training rows |T|")->required();
    cmd.add_option("--val-size", val_size, "Validation rows |V|")->required();
    cmd.add_option("--test-fraction", test_fraction, "Share held out for testing")->capture_default_str();
    cmd.add_option("--seed", seed, "Split seed")->capture_default_str();
    cmd.add_flag("--raw", raw, "Skip standardization");
  }

  struct Parts {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
  };

  Parts load() const {
    LabeledDataset data = load_csv(path, label_column, positive_label);
    if (!raw) data = standardize(data);
    const SplitSpec split = stratified_split(data, train_size, val_size, test_fraction, seed);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << '\n';
    return {data.subset(split.train_idx), data.subset(split.val_idx), data.subset(split.test_idx)};
  }
};

int run_tune(const DataOptions& data, const std::string& mode, double epsilon, const std::string& flip,
             double lower, double upper) {
  if (mode != "optimistic" && mode != "pessimistic") {
    throw Error(ErrorCode::ConfigError, "--mode must be optimistic or pessimistic");
  }
  const FlipMode flip_mode = parse_flip_mode(flip);
  const auto parts = data.load();
  const HyperBounds bounds = HyperBounds::uniform(parts.train.num_features, lower, upper);
  if (mode == "optimistic") {
    const OptimisticSolution opt = solve_optimistic(parts.train, parts.val, bounds);
    std::cout << model_to_json(opt.model, opt.outer_objective, 0.0, flip_mode, data.seed) << '\n';
    return kOk;
  }
  const TuneResult r = tune(parts.train, parts.val, bounds, epsilon, flip_mode);
  if (r.pessimistic_fallback) std::cerr << "note: flip set empty, pessimistic result is the optimistic one\n";
  std::cout << model_to_json(r.pessimistic_model(), r.pessimistic.outer_objective, epsilon, flip_mode, data.seed)
            << '\n';
  return kOk;
}

int run_experiment_command(const std::string& config_path, const std::string& output_dir) {
  ExperimentConfig config = load_config(config_path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  const auto summary = run_and_write(config);
  std::cout << summary_csv(summary);
  std::cerr << "wrote " << (std::filesystem::path(config.output_dir) / "results.csv").string() << " and summary.csv\n";
  return kOk;
}

int run_evaluate(const std::string& config_path, const std::vector<double>& epsilons, const std::string& output_dir) {
  ExperimentConfig config = load_config(config_path);
  if (!epsilons.empty()) config.epsilons = epsilons;
  if (!output_dir.empty()) config.output_dir = output_dir;
  config.validate();
  const auto summary = run_and_write(config);
  std::cout << "train_size,val_size,epsilon,rho_val,rho_test,pessimistic_outer,worst_case,worst_case_flip,"
               "pessimistic_test_accuracy,optimistic_test_accuracy\n";
  for (const auto& row : summary) {
    std::cout << row.train_size << ',' << row.val_size << ',' << row.epsilon << ',' << row.rho_val << ','
              << row.rho_test << ',' << row.mean("pessimistic_outer") << ',' << row.mean("worst_case") << ','
              << row.mean("worst_case_flip") << ',' << row.mean("pessimistic_test_accuracy") << ','
              << row.mean("optimistic_test_accuracy") << '\n';
  }
  return kOk;
}

int run_attack(const DataOptions& data, double rho, const std::string& part, const std::string& targets,
               const std::string& out_path, double c) {
  if (part != "test" && part != "validation") throw Error(ErrorCode::ConfigError, "--part must be test or validation");
  if (targets != "margin" && targets != "all") throw Error(ErrorCode::ConfigError, "--targets must be margin or all");
  const auto parts = data.load();
  const LabeledDataset& points = part == "test" ? parts.test : parts.val;
  const SvmModel reference = train_reference_svm(parts.train, c);
  AttackConfig a;
  a.rho = rho;
  if (targets == "all") {
    for (std::size_t i = 0; i < points.size(); ++i) a.target_indices.push_back(i);
  } else {
    const HyperBounds bounds = HyperBounds::uniform(parts.train.num_features, 0.0, 1.0);
    a.target_indices = select_margin_targets(solve_optimistic(parts.train, parts.val, bounds).model, points);
  }
  const LabeledDataset moved = perturb(points, reference, a);
  if (out_path.empty()) {
    std::cout << to_csv(moved);
    std::cerr << attack_sidecar_json(a, data.seed) << '\n';
    return kOk;
  }
  write_csv(out_path, moved);
  const std::string sidecar = std::filesystem::path(out_path).replace_extension(".json").string();
  std::ofstream(sidecar) << attack_sidecar_json(a, data.seed) << '\n';
  std::cerr << "wrote " << out_path << " and " << sidecar << '\n';
  return kOk;
}

int run_selftest(std::uint64_t seed) {
  struct Suite {
    const char* name;
    checks::Outcome outcome;
  };
  const LabeledDataset none;
  std::vector<Suite> suites;
  suites.push_back({"simplex vs vertex enumeration", checks::lp_against_enumeration(60, 6, seed)});
  suites.push_back({"branch-and-bound vs enumeration", checks::mip_against_enumeration(30, 8, seed + 1)});
  suites.push_back({"flip identity", checks::flip_identity(50, seed + 2)});
  suites.push_back({"flip partition", checks::flip_partition(200, seed + 3)});
  suites.push_back({"one-feature bilevel oracle", checks::bilevel_oracle(4, 1e-4, seed + 4)});
  suites.push_back({"optimistic <= pessimistic <= worst case", checks::bound_chain(6, none, seed + 5)});
  suites.push_back({"epsilon monotonicity", checks::epsilon_monotone(3, none, seed + 6)});
  suites.push_back({"attack invariants", checks::attack_invariants(20, seed + 7)});
  bool ok = true;
  for (const auto& s : suites) {
    ok = ok && s.outcome.passed;
    std::cout << (s.outcome.passed ? "PASS " : "FAIL ") << s.name << " (" << s.outcome.cases << " cases";
    if (s.outcome.failures > 0) std::cout << ", " << s.outcome.failures << " failed: " << s.outcome.detail;
    std::cout << ")\n";
  }
  return ok ? kOk : kSolverError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel hyperparameter tuning of linear SVMs"};
  app.require_subcommand(1);

  DataOptions tune_data;
  std::string mode = "pessimistic";
  std::string flip = "margin_plus_misclassified";
  double epsilon = 0.0;
  double lower = 0.0;
  double upper = 1.0;
  auto* tune_cmd = app.add_subcommand("tune", "Tune on one split and print the model as JSON");
  tune_data.add_to(*tune_cmd);
  tune_cmd->add_option("--mode", mode, "optimistic or pessimistic")->capture_default_str();
  tune_cmd->add_option("--epsilon", epsilon, "Relative training-loss slack")->capture_default_str();
  tune_cmd->add_option("--flip-mode", flip, "margin_plus_misclassified, all or threshold")->capture_default_str();
  tune_cmd->add_option("--lower", lower, "Lower hyperparameter bound")->capture_default_str();
  tune_cmd->add_option("--upper", upper, "Upper hyperparameter bound")->capture_default_str();

  std::string config_path;
  std::string output_dir;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a config grid and write results.csv and summary.csv");
  exp_cmd->add_option("--config", config_path, "TOML experiment config")->required();
  exp_cmd->add_option("--output-dir", output_dir, "Override the config's output_dir");

  std::vector<double> sweep;
  auto* eval_cmd = app.add_subcommand("evaluate", "Worst-case evaluation sweep over epsilon");
  eval_cmd->add_option("--config", config_path, "TOML experiment config")->required();
  eval_cmd->add_option("--epsilons", sweep, "Override the config's epsilon list");
  eval_cmd->add_option("--output-dir", output_dir, "Override the config's output_dir");

  DataOptions attack_data;
  double rho = 0.3;
  double c = 1.0;
  std::string part = "test";
  std::string targets = "margin";
  std::string out_path;
  auto* attack_cmd = app.add_subcommand("attack", "Write a perturbed split and its sidecar JSON");
  attack_data.add_to(*attack_cmd);
  attack_cmd->add_option("--rho", rho, "l2 budget")->capture_default_str();
  attack_cmd->add_option("--part", part, "test or validation")->capture_default_str();
  attack_cmd->add_option("--targets", targets, "margin or all")->capture_default_str();
  attack_cmd->add_option("--reference-c", c, "Box of the reference SVM")->capture_default_str();
  attack_cmd->add_option("--out", out_path, "Output CSV; standard output when omitted");

  std::uint64_t self_seed = 2024;
  auto* self_cmd = app.add_subcommand("selftest", "Quick oracle and property checks");
  self_cmd->add_option("--seed", self_seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kOk : kConfigError;
  }

  try {
    if (*tune_cmd) return run_tune(tune_data, mode, epsilon, flip, lower, upper);
    if (*exp_cmd) return run_experiment_command(config_path, output_dir);
    if (*eval_cmd) return run_evaluate(config_path, sweep, output_dir);
    if (*attack_cmd) return run_attack(attack_data, rho, part, targets, out_path, c);
    if (*self_cmd) return run_selftest(self_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
  return kConfigError;
}
