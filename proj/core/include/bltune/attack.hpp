#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bltune/bilevel.hpp"
#include "bltune/dataset.hpp"

namespace bltune {

/// l2-bounded evasion attack. step_size <= 0 means rho / 10.
struct AttackConfig {
  double rho = 0.0;
  double step_size = 0.0;
  int max_iters = 20;
  std::vector<std::size_t> target_indices;

  void validate(std::size_t points) const;
};

/// Box-constrained hinge SVM with |w_j| <= c and |b| <= intercept_bound.
/// Throws DegenerateReference for c <= 0 or a zero weight vector.
SvmModel train_reference_svm(const LabeledDataset& train, double c = 1.0, double intercept_bound = 1000.0);

/// Moves every target by projected steps along -y w / ||w|| inside the ball
/// of radius rho around its start. Labels and non-targets are untouched.
LabeledDataset perturb(const LabeledDataset& points, const SvmModel& model, const AttackConfig& config);

/// {i : |f(x_i)| < 1}
std::vector<std::size_t> select_margin_targets(const SvmModel& model, const LabeledDataset& data);

/// {rho, seed, target_indices}
std::string attack_sidecar_json(const AttackConfig& config, std::uint64_t seed);

}  // namespace bltune
