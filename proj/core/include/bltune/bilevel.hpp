#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bltune/dataset.hpp"
#include "bltune/mip.hpp"

namespace bltune {

/// Box on the hyperparameters: lower <= w_bar <= upper, per feature.
struct HyperBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static HyperBounds uniform(std::size_t features, double lower, double upper);
  void validate(std::size_t features) const;
};

/// Linear classifier f(x) = x^T w - b.
struct SvmModel {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> xi;     // training slacks, when known
  std::vector<double> w_bar;  // hyperparameters that bounded training, when known

  double decision(std::span<const double> x) const;
};

struct FlipSets {
  std::vector<std::size_t> v1;  // |f| < 1
  std::vector<std::size_t> v2;  // |f| >= 1, y f >= 1
  std::vector<std::size_t> v3;  // |f| >= 1, y f <= -1
  std::vector<std::size_t> v_f;
};

enum class FlipMode { MarginPlusMisclassified, All, Threshold };

std::string_view to_string(FlipMode mode);
FlipMode parse_flip_mode(std::string_view text);

enum class PessimisticTestModel { Adversarial, Replica };

struct BilevelSettings {
  /// |b| <= intercept_bound in every formulation.
  double intercept_bound = 1000.0;
  /// Initial cap on the multiplier of the training-loss row in the
  /// pessimistic model. Doubled together with big-M on guard retries.
  double loss_multiplier_cap = 10.0;
  double big_m_headroom = 1.25;
  int big_m_retries = 3;
  MipOptions mip;
};

struct MipStats {
  std::size_t binaries = 0;
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::size_t node_count = 0;
  std::size_t lp_iterations = 0;
  int big_m_doublings = 0;
  /// Guard still flagged after the last retry.
  bool big_m_flagged = false;
  double seconds = 0.0;
};

struct InnerSvmResult {
  SvmModel model;
  double objective = 0.0;  // mean training hinge loss
};

struct OptimisticSolution {
  std::vector<double> w_bar;
  SvmModel model;
  double outer_objective = 0.0;  // mean validation hinge loss
  double inner_objective = 0.0;  // mean training hinge loss at the optimum
  double kkt_residual = 0.0;
  MipStats stats;
};

struct PessimisticSolution {
  std::vector<double> w_bar_star;
  SvmModel replica;      // (w_hat, b_hat, xi_hat)
  SvmModel adversarial;  // (w, b, xi) of the flipped inner problem
  std::vector<double> v;  // flipped validation slacks, aligned with v_f
  double outer_objective = 0.0;
  double epsilon = 0.0;
  /// Multiplier of the training-loss row (written lambda in the KKT system).
  double loss_multiplier = 0.0;
  double kkt_residual = 0.0;
  /// |flipped inner optimum re-solved by simplex - MIP value of the v block|.
  double inner_certificate_gap = 0.0;
  MipStats stats;
  std::vector<double> raw;  // full MIP primal
};

struct WorstCaseResult {
  double value = 0.0;          // exact maximum of the mean validation hinge loss
  double flip_estimate = 0.0;  // original-label loss at the flipped-label minimizer
  double theta = 0.0;          // optimal mean training loss at w_bar
  SvmModel model;              // maximizer
  SvmModel flip_model;         // flipped-label minimizer
  MipStats stats;
};

double hinge_loss(const SvmModel& model, std::span<const double> x, int y);
int zero_one_margin_loss(const SvmModel& model, std::span<const double> x, int y);
double mean_hinge_loss(const SvmModel& model, const LabeledDataset& data);
/// Fraction with y * sign(f(x)) > 0; f = 0 counts as a miss.
double accuracy(const SvmModel& model, const LabeledDataset& data);

/// min (1/|T|) sum xi  s.t. xi_i >= 1 - y_i (x_i^T w - b), xi >= 0,
/// -w_bar <= w <= w_bar, |b| <= intercept_bound.
InnerSvmResult train_inner_svm(const LabeledDataset& train, const std::vector<double>& w_bar,
                               double intercept_bound = 1000.0);

FlipSets compute_flip_sets(const SvmModel& reference, const LabeledDataset& validation,
                           FlipMode mode = FlipMode::MarginPlusMisclassified, std::size_t train_size = 0);

OptimisticSolution solve_optimistic(const LabeledDataset& train, const LabeledDataset& validation,
                                    const HyperBounds& bounds, const BilevelSettings& settings = {});

/// Throws EmptyFlipSet when flip.v_f is empty. Each hint is a hyperparameter
/// vector used to seed the search with a feasible point; the box corners
/// are always tried.
PessimisticSolution solve_pessimistic(const LabeledDataset& train, const LabeledDataset& validation,
                                      const HyperBounds& bounds, double epsilon, const FlipSets& flip,
                                      const BilevelSettings& settings = {},
                                      const std::vector<std::vector<double>>& w_bar_hints = {});

WorstCaseResult evaluate_worst_case(const std::vector<double>& w_bar_star, const LabeledDataset& train,
                                    const LabeledDataset& validation, double epsilon, const FlipSets& flip,
                                    const BilevelSettings& settings = {});

/// The tuning pipeline: optimistic solve, flip sets from its model, the
/// pessimistic solve (or the optimistic result when V_f is empty) and the
/// worst-case evaluation of the optimistic hyperparameters.
struct TuneResult {
  OptimisticSolution optimistic;
  FlipSets flip;
  FlipMode flip_mode = FlipMode::MarginPlusMisclassified;
  PessimisticSolution pessimistic;
  bool pessimistic_fallback = false;
  WorstCaseResult worst_case;
  double epsilon = 0.0;

  /// Model scored on test data for the pessimistic side.
  SvmModel pessimistic_model(PessimisticTestModel which = PessimisticTestModel::Adversarial) const;
};

TuneResult tune(const LabeledDataset& train, const LabeledDataset& validation, const HyperBounds& bounds,
                double epsilon, FlipMode flip_mode, const BilevelSettings& settings = {});

/// {w, b, w_bar, objective, epsilon, flip_mode, seed}
std::string model_to_json(const SvmModel& model, double objective, double epsilon, FlipMode flip_mode,
                          std::uint64_t seed);

}  // namespace bltune
