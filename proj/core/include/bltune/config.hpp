#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bltune/bilevel.hpp"

namespace bltune {

enum class Standardization { Full, TrainOnly, None };
/// Model scored on test data for the optimistic side. WorstCase is the
/// maximizer of the validation loss over the near-optimal training models
/// at the tuned hyperparameters; Flip is the flipped-label minimizer over
/// the same set; Tuned is the optimistic solution itself.
enum class OptimisticTestModel { Tuned, WorstCase, Flip };

std::string_view to_string(Standardization mode);
std::string_view to_string(OptimisticTestModel mode);
std::string_view to_string(PessimisticTestModel mode);

/// Flat key/value experiment description, read from TOML.
struct ExperimentConfig {
  std::string data_path;
  std::string label_column = "class";
  std::string positive_label = "1";
  Standardization standardization = Standardization::Full;
  double test_fraction = 0.5;

  /// (|T|, |V|) grid points, either listed directly or derived from
  /// totals and ratios |T|/|V|.
  std::vector<std::pair<std::size_t, std::size_t>> sizes;

  std::vector<double> epsilons{0.0, 0.2, 0.4, 0.6};
  std::vector<double> rho_val{0.0};
  std::vector<double> rho_test{0.0};
  FlipMode flip_mode = FlipMode::MarginPlusMisclassified;
  OptimisticTestModel optimistic_test_model = OptimisticTestModel::WorstCase;
  PessimisticTestModel pessimistic_test_model = PessimisticTestModel::Adversarial;

  int runs = 10;
  std::uint64_t base_seed = 0;
  double lower = 0.0;
  double upper = 1.0;
  double reference_c = 1.0;
  double attack_step = 0.0;
  int attack_iters = 20;
  /// Abort on a violated proposition check instead of only recording it.
  bool enforce_checks = true;
  std::string output_dir = "results";
  BilevelSettings settings;

  void validate() const;
};

/// Throws ConfigError on syntax errors, unknown keys and bad values.
ExperimentConfig parse_config(std::string_view toml_text);
ExperimentConfig load_config(const std::string& path);

}  // namespace bltune
