#include "bltune/attack.hpp"

#include <cmath>

#include "bltune/error.hpp"
#include "json.hpp"

namespace bltune {

void AttackConfig::validate(std::size_t points) const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorCode::ConfigError, "rho must be finite and >= 0");
  if (max_iters < 1) throw Error(ErrorCode::ConfigError, "max_iters must be >= 1");
  if (!std::isfinite(step_size)) throw Error(ErrorCode::ConfigError, "step_size must be finite");
  for (std::size_t i : target_indices) {
    if (i >= points) throw Error(ErrorCode::DimensionMismatch, "attack target index out of range");
  }
}

SvmModel train_reference_svm(const LabeledDataset& train, double c, double intercept_bound) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::DegenerateReference, "reference box c must be positive, got " + std::to_string(c));
  }
  InnerSvmResult fit = train_inner_svm(train, std::vector<double>(train.num_features, c), intercept_bound);
  double norm = 0.0;
  for (double v : fit.model.w) norm += v * v;
  if (norm == 0.0) throw Error(ErrorCode::DegenerateReference, "reference SVM has w = 0");
  return fit.model;
}

LabeledDataset perturb(const LabeledDataset& points, const SvmModel& model, const AttackConfig& config) {
  config.validate(points.size());
  if (model.w.size() != points.num_features) {
    throw Error(ErrorCode::DimensionMismatch, "model width differs from feature count");
  }
  double norm = 0.0;
  for (double v : model.w) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw Error(ErrorCode::DegenerateReference, "attack model has w = 0");

  LabeledDataset out = points;
  if (config.rho == 0.0 || config.target_indices.empty()) return out;

  const double eta = config.step_size > 0.0 ? config.step_size : config.rho / 10.0;
  const std::size_t p = points.num_features;
  std::vector<double> delta(p);
  for (std::size_t i : config.target_indices) {
    const auto x0 = points.row(i);
    auto x = out.row(i);
    const double y = points.labels[i];
    std::fill(delta.begin(), delta.end(), 0.0);
    for (int it = 0; it < config.max_iters; ++it) {
      double len = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        delta[j] -= eta * y * model.w[j] / norm;
        len += delta[j] * delta[j];
      }
      len = std::sqrt(len);
      if (len > config.rho) {
        const double shrink = config.rho / len;
        for (double& d : delta) d *= shrink;
      }
    }
    for (std::size_t j = 0; j < p; ++j) x[j] = x0[j] + delta[j];
    // Rounding in x0 + delta can push the norm a hair past rho.
    double len = 0.0;
    for (std::size_t j = 0; j < p; ++j) len += (x[j] - x0[j]) * (x[j] - x0[j]);
    len = std::sqrt(len);
    if (len > config.rho) {
      for (std::size_t j = 0; j < p; ++j) x[j] = x0[j] + delta[j] * (config.rho / len) * (1.0 - 1e-15);
    }
  }
  return out;
}

std::vector<std::size_t> select_margin_targets(const SvmModel& model, const LabeledDataset& data) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (std::abs(model.decision(data.row(i))) < 1.0) out.push_back(i);
  }
  return out;
}

std::string attack_sidecar_json(const AttackConfig& config, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["rho"] = config.rho;
  j["seed"] = seed;
  j["target_indices"] = config.target_indices;
  return j.dump(2);
}

}  // namespace bltune
