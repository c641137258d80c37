#include "bltune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "bltune/error.hpp"
#include "text_format.hpp"

namespace bltune {

using detail::format_number;

LabeledDataset load_experiment_data(const ExperimentConfig& config) {
  LabeledDataset data = load_csv(config.data_path, config.label_column, config.positive_label);
  if (config.standardization == Standardization::Full) data = standardize(data);
  return data;
}

namespace {

std::string point_name(std::size_t train_size, std::size_t val_size, double rho_val, int run) {
  return "T" + std::to_string(train_size) + "_V" + std::to_string(val_size) + "_rv" + format_number(rho_val) +
         "_run" + std::to_string(run);
}

std::vector<RunResult> run_cell_impl(const LabeledDataset& data, const ExperimentConfig& config,
                                     std::size_t train_size, std::size_t val_size, double rho_val, int run,
                                     const CellArtifacts& artifacts) {
  const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(run);
  const SplitSpec split = stratified_split(data, train_size, val_size, config.test_fraction, seed);
  LabeledDataset train = data.subset(split.train_idx);
  LabeledDataset val = data.subset(split.val_idx);
  LabeledDataset test = data.subset(split.test_idx);
  if (test.size() == 0) throw Error(ErrorCode::InsufficientSamples, "test part is empty");
  if (config.standardization == Standardization::TrainOnly) {
    const auto stats = compute_statistics(train);
    train = apply_standardization(train, stats);
    val = apply_standardization(val, stats);
    test = apply_standardization(test, stats);
  }
  const HyperBounds bounds = HyperBounds::uniform(data.num_features, config.lower, config.upper);
  const BilevelSettings& settings = config.settings;
  const std::string name = point_name(train_size, val_size, rho_val, run);

  const bool attacks = rho_val > 0.0 || std::any_of(config.rho_test.begin(), config.rho_test.end(),
                                                    [](double r) { return r > 0.0; });
  SvmModel reference;
  if (attacks) reference = train_reference_svm(train, config.reference_c, settings.intercept_bound);
  const auto attack_config = [&](double rho, std::vector<std::size_t> targets) {
    AttackConfig a;
    a.rho = rho;
    a.step_size = config.attack_step;
    a.max_iters = config.attack_iters;
    a.target_indices = std::move(targets);
    return a;
  };

  std::size_t val_targets = 0;
  if (rho_val > 0.0) {
    const OptimisticSolution clean = solve_optimistic(train, val, bounds, settings);
    const AttackConfig a = attack_config(rho_val, select_margin_targets(clean.model, val));
    val_targets = a.target_indices.size();
    val = perturb(val, reference, a);
    if (artifacts.perturbed) {
      (*artifacts.perturbed)[name + "_validation.csv"] = to_csv(val);
      (*artifacts.perturbed)[name + "_validation.json"] = attack_sidecar_json(a, seed);
    }
  }

  const OptimisticSolution opt = solve_optimistic(train, val, bounds, settings);
  const FlipSets flip = compute_flip_sets(opt.model, val, config.flip_mode, train.size());
  if (artifacts.models) {
    (*artifacts.models)[name + "_optimistic.json"] =
        model_to_json(opt.model, opt.outer_objective, 0.0, config.flip_mode, seed);
  }

  const std::vector<std::size_t> test_targets = select_margin_targets(opt.model, test);
  std::vector<LabeledDataset> attacked_tests;
  for (double rho : config.rho_test) {
    const AttackConfig a = attack_config(rho, test_targets);
    attacked_tests.push_back(rho > 0.0 ? perturb(test, reference, a) : test);
    if (rho > 0.0 && artifacts.perturbed) {
      const std::string file = name + "_test_rt" + format_number(rho);
      (*artifacts.perturbed)[file + ".csv"] = to_csv(attacked_tests.back());
      (*artifacts.perturbed)[file + ".json"] = attack_sidecar_json(a, seed);
    }
  }

  std::vector<double> epsilons = config.epsilons;
  std::sort(epsilons.begin(), epsilons.end());
  epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());

  std::vector<RunResult> out;
  std::vector<double> pess_values;
  std::vector<double> worst_values;
  for (double eps : epsilons) {
    PessimisticSolution pess;
    const bool fallback = flip.v_f.empty();
    if (fallback) {
      pess.w_bar_star = opt.w_bar;
      pess.replica = opt.model;
      pess.adversarial = opt.model;
      pess.outer_objective = opt.outer_objective;
      pess.epsilon = eps;
    } else {
      pess = solve_pessimistic(train, val, bounds, eps, flip, settings, {opt.w_bar});
    }
    const WorstCaseResult wc = evaluate_worst_case(opt.w_bar, train, val, eps, flip, settings);
    pess_values.push_back(pess.outer_objective);
    worst_values.push_back(wc.value);

    const SvmModel pess_model =
        config.pessimistic_test_model == PessimisticTestModel::Replica ? pess.replica : pess.adversarial;
    const SvmModel& opt_model = config.optimistic_test_model == OptimisticTestModel::Tuned ? opt.model
                                : config.optimistic_test_model == OptimisticTestModel::Flip
                                    ? wc.flip_model
                                    : wc.model;
    if (artifacts.models) {
      (*artifacts.models)[name + "_eps" + format_number(eps) + "_pessimistic.json"] =
          model_to_json(pess_model, pess.outer_objective, eps, config.flip_mode, seed);
      (*artifacts.models)[name + "_eps" + format_number(eps) + "_worst_case.json"] =
          model_to_json(opt_model, wc.value, eps, config.flip_mode, seed);
    }

    for (std::size_t k = 0; k < config.rho_test.size(); ++k) {
      RunResult r;
      r.train_size = train_size;
      r.val_size = val_size;
      r.epsilon = eps;
      r.rho_val = rho_val;
      r.rho_test = config.rho_test[k];
      r.flip_mode = config.flip_mode;
      r.run = run;
      r.seed = seed;
      r.optimistic_outer = opt.outer_objective;
      r.pessimistic_outer = pess.outer_objective;
      r.worst_case = wc.value;
      r.worst_case_flip = wc.flip_estimate;
      r.theta = wc.theta;
      r.optimistic_test_accuracy = accuracy(opt_model, attacked_tests[k]);
      r.pessimistic_test_accuracy = accuracy(pess_model, attacked_tests[k]);
      r.tuned_test_accuracy = accuracy(opt.model, attacked_tests[k]);
      r.flip_size = flip.v_f.size();
      r.val_targets = val_targets;
      r.test_targets = config.rho_test[k] > 0.0 ? test_targets.size() : 0;
      r.pessimistic_fallback = fallback;
      r.big_m_flagged = opt.stats.big_m_flagged || pess.stats.big_m_flagged;
      r.check_dominance = pess.outer_objective <= wc.value + kCheckTolerance;
      r.optimistic_seconds = opt.stats.seconds;
      r.pessimistic_seconds = pess.stats.seconds;
      r.worst_case_seconds = wc.stats.seconds;
      r.optimistic_nodes = opt.stats.node_count;
      r.pessimistic_nodes = pess.stats.node_count;
      r.worst_case_nodes = wc.stats.node_count;
      out.push_back(r);
    }
  }

  bool monotone = true;
  for (std::size_t k = 1; k < epsilons.size(); ++k) {
    monotone = monotone && pess_values[k] >= pess_values[k - 1] - kCheckTolerance &&
               worst_values[k] >= worst_values[k - 1] - kCheckTolerance;
  }
  const bool lower = epsilons.front() != 0.0 || opt.outer_objective <= pess_values.front() + kCheckTolerance;
  bool dominance = true;
  for (auto& r : out) {
    r.check_monotone = monotone;
    r.check_lower = lower;
    dominance = dominance && r.check_dominance;
  }
  if (config.enforce_checks && (!monotone || !dominance)) {
    std::string values;
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
      values += " eps=" + format_number(epsilons[k]) + ": pessimistic " + format_number(pess_values[k]) +
                ", worst case " + format_number(worst_values[k]) + ";";
    }
    throw Error(ErrorCode::InvariantViolation,
                std::string(!dominance ? "pessimistic value above the worst case" : "values decrease in epsilon") +
                    ":" + values);
  }
  return out;
}

}  // namespace

std::vector<RunResult> run_cell(const LabeledDataset& data, const ExperimentConfig& config, std::size_t train_size,
                                std::size_t val_size, double rho_val, int run, const CellArtifacts& artifacts) {
  try {
    return run_cell_impl(data, config, train_size, val_size, rho_val, run, artifacts);
  } catch (const Error& e) {
    throw Error(e.code(), "|T|=" + std::to_string(train_size) + " |V|=" + std::to_string(val_size) +
                              " rho_val=" + format_number(rho_val) + " run " + std::to_string(run) + " seed " +
                              std::to_string(config.base_seed + static_cast<std::uint64_t>(run)) + ": " + e.what());
  }
}

std::vector<RunResult> run_experiment(const LabeledDataset& data, const ExperimentConfig& config,
                                      const CellArtifacts& artifacts) {
  config.validate();
  std::vector<RunResult> out;
  for (const auto& [t, v] : config.sizes) {
    for (double rho_val : config.rho_val) {
      for (int run = 0; run < config.runs; ++run) {
        auto cell = run_cell(data, config, t, v, rho_val, run, artifacts);
        out.insert(out.end(), cell.begin(), cell.end());
      }
    }
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

double SummaryRow::mean(const std::string& column) const {
  for (const auto& [name, value] : stats) {
    if (name == column) return value.first;
  }
  throw Error(ErrorCode::InvariantViolation, "no summary column '" + column + "'");
}

double SummaryRow::std_dev(const std::string& column) const {
  for (const auto& [name, value] : stats) {
    if (name == column) return value.second;
  }
  throw Error(ErrorCode::InvariantViolation, "no summary column '" + column + "'");
}

namespace {

using Column = std::pair<const char*, double RunResult::*>;

const std::vector<Column>& summary_columns() {
  static const std::vector<Column> columns{
      {"optimistic_outer", &RunResult::optimistic_outer},
      {"pessimistic_outer", &RunResult::pessimistic_outer},
      {"worst_case", &RunResult::worst_case},
      {"worst_case_flip", &RunResult::worst_case_flip},
      {"optimistic_test_accuracy", &RunResult::optimistic_test_accuracy},
      {"pessimistic_test_accuracy", &RunResult::pessimistic_test_accuracy},
      {"tuned_test_accuracy", &RunResult::tuned_test_accuracy},
  };
  return columns;
}

using GroupKey = std::tuple<std::size_t, std::size_t, double, double, double, int>;

GroupKey key_of(const RunResult& r) {
  return {r.train_size, r.val_size, r.epsilon, r.rho_val, r.rho_test, static_cast<int>(r.flip_mode)};
}

}  // namespace

std::vector<SummaryRow> aggregate(const std::vector<RunResult>& results) {
  std::map<GroupKey, std::vector<const RunResult*>> groups;
  for (const auto& r : results) groups[key_of(r)].push_back(&r);
  std::vector<SummaryRow> out;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [](const RunResult* a, const RunResult* b) {
      return std::tie(a->run, a->seed) < std::tie(b->run, b->seed);
    });
    SummaryRow row;
    row.train_size = std::get<0>(key);
    row.val_size = std::get<1>(key);
    row.epsilon = std::get<2>(key);
    row.rho_val = std::get<3>(key);
    row.rho_test = std::get<4>(key);
    row.flip_mode = members.front()->flip_mode;
    row.runs = members.size();
    for (const auto& [name, field] : summary_columns()) {
      std::vector<double> values;
      for (const RunResult* r : members) values.push_back(r->*field);
      row.stats.emplace_back(name, mean_std(values));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string results_csv(const std::vector<RunResult>& results) {
  std::string out =
      "train_size,val_size,epsilon,rho_val,rho_test,flip_mode,run,seed,optimistic_outer,pessimistic_outer,"
      "worst_case,worst_case_flip,theta,optimistic_test_accuracy,pessimistic_test_accuracy,tuned_test_accuracy,"
      "flip_size,val_targets,test_targets,pessimistic_fallback,big_m_flagged,check_dominance,check_monotone,"
      "check_lower,optimistic_nodes,pessimistic_nodes,worst_case_nodes,optimistic_seconds,pessimistic_seconds,"
      "worst_case_seconds\n";
  const auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  for (const auto& r : results) {
    out += std::to_string(r.train_size) + "," + std::to_string(r.val_size) + "," + format_number(r.epsilon) + "," +
           format_number(r.rho_val) + "," + format_number(r.rho_test) + "," + std::string(to_string(r.flip_mode)) +
           "," + std::to_string(r.run) + "," + std::to_string(r.seed) + "," + format_number(r.optimistic_outer) +
           "," + format_number(r.pessimistic_outer) + "," + format_number(r.worst_case) + "," +
           format_number(r.worst_case_flip) + "," + format_number(r.theta) + "," +
           format_number(r.optimistic_test_accuracy) + "," + format_number(r.pessimistic_test_accuracy) + "," +
           format_number(r.tuned_test_accuracy) + "," + std::to_string(r.flip_size) + "," +
           std::to_string(r.val_targets) + "," + std::to_string(r.test_targets) + "," + b(r.pessimistic_fallback) +
           "," + b(r.big_m_flagged) + "," + b(r.check_dominance) + "," + b(r.check_monotone) + "," +
           b(r.check_lower) + "," + std::to_string(r.optimistic_nodes) + "," + std::to_string(r.pessimistic_nodes) +
           "," + std::to_string(r.worst_case_nodes) + "," + format_number(r.optimistic_seconds) + "," +
           format_number(r.pessimistic_seconds) + "," + format_number(r.worst_case_seconds) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "train_size,val_size,epsilon,rho_val,rho_test,flip_mode,runs";
  for (const auto& [name, field] : summary_columns()) {
    (void)field;
    out += std::string(",") + name + "_mean," + name + "_std";
  }
  out += "\n";
  for (const auto& row : rows) {
    out += std::to_string(row.train_size) + "," + std::to_string(row.val_size) + "," + format_number(row.epsilon) +
           "," + format_number(row.rho_val) + "," + format_number(row.rho_test) + "," +
           std::string(to_string(row.flip_mode)) + "," + std::to_string(row.runs);
    for (const auto& [name, value] : row.stats) {
      (void)name;
      out += "," + format_number(value.first) + "," + format_number(value.second);
    }
    out += "\n";
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::ConfigError, "failed writing '" + path.string() + "'");
}

}  // namespace

std::vector<SummaryRow> run_and_write(const ExperimentConfig& config) {
  const LabeledDataset data = load_experiment_data(config);
  std::map<std::string, std::string> models;
  std::map<std::string, std::string> perturbed;
  const std::vector<RunResult> results = run_experiment(data, config, {&models, &perturbed});
  const std::vector<SummaryRow> summary = aggregate(results);

  const std::filesystem::path root(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(root / "models", ec);
  std::filesystem::create_directories(root / "perturbed", ec);
  if (ec) throw Error(ErrorCode::ConfigError, "cannot create '" + root.string() + "': " + ec.message());
  write_file(root / "results.csv", results_csv(results));
  write_file(root / "summary.csv", summary_csv(summary));
  for (const auto& [file, text] : models) write_file(root / "models" / file, text);
  for (const auto& [file, text] : perturbed) write_file(root / "perturbed" / file, text);
  return summary;
}

}  // namespace bltune
