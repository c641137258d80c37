#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bltune/attack.hpp"
#include "bltune/bilevel.hpp"
#include "bltune/config.hpp"
#include "bltune/dataset.hpp"

namespace bltune {

/// One (run, epsilon, rho_test) outcome.
struct RunResult {
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  double epsilon = 0.0;
  double rho_val = 0.0;
  double rho_test = 0.0;
  FlipMode flip_mode = FlipMode::MarginPlusMisclassified;
  int run = 0;
  std::uint64_t seed = 0;

  double optimistic_outer = 0.0;
  double pessimistic_outer = 0.0;
  double worst_case = 0.0;
  double worst_case_flip = 0.0;
  double theta = 0.0;

  double optimistic_test_accuracy = 0.0;   // model chosen by optimistic_test_model
  double pessimistic_test_accuracy = 0.0;  // model chosen by pessimistic_test_model
  double tuned_test_accuracy = 0.0;        // the optimistic solution itself

  std::size_t flip_size = 0;
  std::size_t val_targets = 0;
  std::size_t test_targets = 0;
  bool pessimistic_fallback = false;
  bool big_m_flagged = false;

  /// pessimistic <= worst case at this epsilon.
  bool check_dominance = true;
  /// Both values nondecreasing over this run's epsilon list.
  bool check_monotone = true;
  /// optimistic <= pessimistic at epsilon 0; recorded, never enforced.
  bool check_lower = true;

  double optimistic_seconds = 0.0;
  double pessimistic_seconds = 0.0;
  double worst_case_seconds = 0.0;
  std::size_t optimistic_nodes = 0;
  std::size_t pessimistic_nodes = 0;
  std::size_t worst_case_nodes = 0;
};

constexpr double kCheckTolerance = 1e-6;

/// Files written while running a cell; any pointer may be null.
struct CellArtifacts {
  std::map<std::string, std::string>* models = nullptr;     // file name -> JSON
  std::map<std::string, std::string>* perturbed = nullptr;  // file name -> CSV or JSON sidecar
};

/// Splits `data` with seed base_seed + run, optionally attacks validation
/// and test points, then runs the optimistic solve once and the
/// pessimistic solve and worst-case evaluation for every epsilon. Returns
/// one result per (epsilon, rho_test), epsilons in ascending order. Throws
/// InvariantViolation naming the point when an enforced check fails, and
/// rethrows module errors with the point and seed attached.
std::vector<RunResult> run_cell(const LabeledDataset& data, const ExperimentConfig& config, std::size_t train_size,
                                std::size_t val_size, double rho_val, int run, const CellArtifacts& artifacts = {});

/// Every cell of the config, in grid order.
std::vector<RunResult> run_experiment(const LabeledDataset& data, const ExperimentConfig& config,
                                      const CellArtifacts& artifacts = {});

/// Loads and preprocesses the configured dataset.
LabeledDataset load_experiment_data(const ExperimentConfig& config);

struct SummaryRow {
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  double epsilon = 0.0;
  double rho_val = 0.0;
  double rho_test = 0.0;
  FlipMode flip_mode = FlipMode::MarginPlusMisclassified;
  std::size_t runs = 0;
  /// column name -> (mean, sample std); std is 0 for a single run.
  std::vector<std::pair<std::string, std::pair<double, double>>> stats;

  double mean(const std::string& column) const;
  double std_dev(const std::string& column) const;
};

/// Groups by config point; groups and columns come out in a fixed order
/// regardless of the order of `results`.
std::vector<SummaryRow> aggregate(const std::vector<RunResult>& results);

std::string results_csv(const std::vector<RunResult>& results);
std::string summary_csv(const std::vector<SummaryRow>& rows);

/// Mean and sample standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

/// Runs the experiment and writes results.csv, summary.csv, models/ and
/// perturbed/ under config.output_dir.
std::vector<SummaryRow> run_and_write(const ExperimentConfig& config);

}  // namespace bltune
