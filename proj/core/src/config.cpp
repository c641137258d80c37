#include "bltune/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bltune/error.hpp"
#include "toml.hpp"

namespace bltune {

std::string_view to_string(Standardization mode) {
  switch (mode) {
    case Standardization::Full: return "full";
    case Standardization::TrainOnly: return "train";
    case Standardization::None: return "none";
  }
  return "unknown";
}

std::string_view to_string(OptimisticTestModel mode) {
  switch (mode) {
    case OptimisticTestModel::Tuned: return "tuned";
    case OptimisticTestModel::WorstCase: return "worst_case";
    case OptimisticTestModel::Flip: return "flip";
  }
  return "unknown";
}

std::string_view to_string(PessimisticTestModel mode) {
  return mode == PessimisticTestModel::Replica ? "replica" : "adversarial";
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (data_path.empty()) fail("data path is required");
  if (sizes.empty()) fail("no (train, validation) sizes given");
  for (const auto& [t, v] : sizes) {
    if (t < 1 || v < 1) fail("train and validation sizes must be >= 1");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) fail("test_fraction must be in [0, 1)");
  if (epsilons.empty()) fail("epsilons must not be empty");
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) fail("epsilon values must be finite and >= 0");
  }
  for (const auto* list : {&rho_val, &rho_test}) {
    if (list->empty()) fail("rho lists must not be empty");
    for (double r : *list) {
      if (!(r >= 0.0) || !std::isfinite(r)) fail("rho values must be finite and >= 0");
    }
  }
  if (runs < 1) fail("runs must be >= 1");
  if (!(lower >= 0.0) || !(lower <= upper) || !std::isfinite(upper)) fail("need 0 <= lower <= upper < inf");
  if (!(reference_c > 0.0)) fail("reference_c must be > 0");
  if (attack_iters < 1) fail("attack_iters must be >= 1");
  if (!(settings.intercept_bound > 0.0)) fail("intercept_bound must be > 0");
  if (settings.big_m_retries < 0) fail("big_m_retries must be >= 0");
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigError, "key '" + key + "': " + what);
}

double as_number(const toml::node& node, const std::string& key) {
  if (auto v = node.value<double>()) return *v;
  bad(key, "expected a number");
}

std::int64_t as_integer(const toml::node& node, const std::string& key) {
  if (auto v = node.value_exact<std::int64_t>()) return *v;
  bad(key, "expected an integer");
}

std::string as_string(const toml::node& node, const std::string& key) {
  if (auto v = node.value_exact<std::string>()) return *v;
  bad(key, "expected a string");
}

std::vector<double> as_numbers(const toml::node& node, const std::string& key) {
  std::vector<double> out;
  if (const auto* arr = node.as_array()) {
    for (const auto& item : *arr) out.push_back(as_number(item, key));
    return out;
  }
  out.push_back(as_number(node, key));
  return out;
}

std::vector<std::size_t> as_sizes(const toml::node& node, const std::string& key) {
  std::vector<std::size_t> out;
  const auto one = [&](const toml::node& item) {
    const std::int64_t v = as_integer(item, key);
    if (v < 1) bad(key, "sizes must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  };
  if (const auto* arr = node.as_array()) {
    for (const auto& item : *arr) one(item);
  } else {
    one(node);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view toml_text) {
  toml::table table;
  try {
    table = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "line " << e.source().begin.line << ": " << e.description();
    throw Error(ErrorCode::ConfigError, msg.str());
  }

  ExperimentConfig cfg;
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> val_sizes;
  std::vector<std::size_t> totals;
  std::vector<double> ratios;
  for (const auto& [k, node] : table) {
    const std::string key(k.str());
    if (key == "data") {
      cfg.data_path = as_string(node, key);
    } else if (key == "label_column") {
      cfg.label_column = as_string(node, key);
    } else if (key == "positive_label") {
      cfg.positive_label = as_string(node, key);
    } else if (key == "standardize") {
      const std::string v = as_string(node, key);
      if (v == "full") {
        cfg.standardization = Standardization::Full;
      } else if (v == "train") {
        cfg.standardization = Standardization::TrainOnly;
      } else if (v == "none") {
        cfg.standardization = Standardization::None;
      } else {
        bad(key, "expected full, train or none");
      }
    } else if (key == "test_fraction") {
      cfg.test_fraction = as_number(node, key);
    } else if (key == "train_sizes") {
      train_sizes = as_sizes(node, key);
    } else if (key == "val_sizes") {
      val_sizes = as_sizes(node, key);
    } else if (key == "totals") {
      totals = as_sizes(node, key);
    } else if (key == "ratios") {
      ratios = as_numbers(node, key);
    } else if (key == "epsilons") {
      cfg.epsilons = as_numbers(node, key);
    } else if (key == "rho_val") {
      cfg.rho_val = as_numbers(node, key);
    } else if (key == "rho_test") {
      cfg.rho_test = as_numbers(node, key);
    } else if (key == "flip_mode") {
      cfg.flip_mode = parse_flip_mode(as_string(node, key));
    } else if (key == "optimistic_test_model") {
      const std::string v = as_string(node, key);
      if (v == "tuned") {
        cfg.optimistic_test_model = OptimisticTestModel::Tuned;
      } else if (v == "worst_case") {
        cfg.optimistic_test_model = OptimisticTestModel::WorstCase;
      } else if (v == "flip") {
        cfg.optimistic_test_model = OptimisticTestModel::Flip;
      } else {
        bad(key, "expected tuned, worst_case or flip");
      }
    } else if (key == "pessimistic_test_model") {
      const std::string v = as_string(node, key);
      if (v == "adversarial") {
        cfg.pessimistic_test_model = PessimisticTestModel::Adversarial;
      } else if (v == "replica") {
        cfg.pessimistic_test_model = PessimisticTestModel::Replica;
      } else {
        bad(key, "expected adversarial or replica");
      }
    } else if (key == "runs") {
      cfg.runs = static_cast<int>(as_integer(node, key));
    } else if (key == "base_seed") {
      const std::int64_t v = as_integer(node, key);
      if (v < 0) bad(key, "must be >= 0");
      cfg.base_seed = static_cast<std::uint64_t>(v);
    } else if (key == "lower") {
      cfg.lower = as_number(node, key);
    } else if (key == "upper") {
      cfg.upper = as_number(node, key);
    } else if (key == "intercept_bound") {
      cfg.settings.intercept_bound = as_number(node, key);
    } else if (key == "loss_multiplier_cap") {
      cfg.settings.loss_multiplier_cap = as_number(node, key);
    } else if (key == "big_m_retries") {
      cfg.settings.big_m_retries = static_cast<int>(as_integer(node, key));
    } else if (key == "node_limit") {
      const std::int64_t v = as_integer(node, key);
      if (v < 1) bad(key, "must be >= 1");
      cfg.settings.mip.node_limit = static_cast<std::size_t>(v);
    } else if (key == "reference_c") {
      cfg.reference_c = as_number(node, key);
    } else if (key == "attack_step") {
      cfg.attack_step = as_number(node, key);
    } else if (key == "attack_iters") {
      cfg.attack_iters = static_cast<int>(as_integer(node, key));
    } else if (key == "enforce_checks") {
      if (auto v = node.value_exact<bool>()) {
        cfg.enforce_checks = *v;
      } else {
        bad(key, "expected true or false");
      }
    } else if (key == "output_dir") {
      cfg.output_dir = as_string(node, key);
    } else {
      throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
    }
  }

  const bool direct = !train_sizes.empty() || !val_sizes.empty();
  const bool derived = !totals.empty() || !ratios.empty();
  if (direct && derived) throw Error(ErrorCode::ConfigError, "give train_sizes/val_sizes or totals/ratios, not both");
  if (direct) {
    if (train_sizes.empty() || val_sizes.empty()) {
      throw Error(ErrorCode::ConfigError, "train_sizes and val_sizes go together");
    }
    for (std::size_t v : val_sizes) {
      for (std::size_t t : train_sizes) cfg.sizes.emplace_back(t, v);
    }
  } else if (derived) {
    if (totals.empty() || ratios.empty()) throw Error(ErrorCode::ConfigError, "totals and ratios go together");
    for (std::size_t total : totals) {
      for (double ratio : ratios) {
        if (!(ratio > 0.0) || !std::isfinite(ratio)) bad("ratios", "must be > 0");
        const auto t = static_cast<std::size_t>(std::llround(static_cast<double>(total) * ratio / (1.0 + ratio)));
        if (t < 1 || t >= total) bad("ratios", "ratio leaves an empty part for total " + std::to_string(total));
        cfg.sizes.emplace_back(t, total - t);
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace bltune
