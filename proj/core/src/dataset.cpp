#include "bltune/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bltune/error.hpp"
#include "json.hpp"
#include "text_format.hpp"

namespace bltune {

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvariantViolation, "SplitMix64::below needs a positive bound");
  // Reject the low partial block so every residue is equally likely.
  const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

void LabeledDataset::push_back(std::span<const double> x, int y) {
  if (x.size() != num_features) throw Error(ErrorCode::DimensionMismatch, "row width differs from feature count");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(y);
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_features = num_features;
  out.feature_names = feature_names;
  out.standardization = standardization;
  out.features.reserve(indices.size() * num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw Error(ErrorCode::DimensionMismatch, "subset index out of range");
    out.push_back(row(i), labels[i]);
  }
  return out;
}

std::size_t LabeledDataset::count_label(int y) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), y));
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

/// Splits text into records of fields, honouring double-quoted fields with
/// "" escapes. Returns each record with the line number it started on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> split_records(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  const auto end_field = [&] {
    fields.push_back(was_quoted ? field : trim(field));
    field.clear();
    was_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    const bool blank = fields.size() == 1 && fields[0].empty();
    if (!blank) records.emplace_back(record_line, std::move(fields));
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      ++line;
      record_line = line;
    } else {
      field.push_back(c);
    }
  }
  if (!field.empty() || !fields.empty() || was_quoted) end_record();
  return records;
}

}  // namespace

LabeledDataset parse_csv(std::string_view text, std::string_view label_column, std::string_view positive_label) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF && static_cast<unsigned char>(text[1]) == 0xBB &&
      static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  const auto records = split_records(text);
  if (records.empty()) throw Error(ErrorCode::MissingLabelColumn, "CSV has no header row");
  const auto& header = records.front().second;
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw Error(ErrorCode::MissingLabelColumn, "no column named '" + std::string(label_column) + "'");
  }
  const auto label_index = static_cast<std::size_t>(label_it - header.begin());

  LabeledDataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_index) data.feature_names.push_back(header[c]);
  }
  data.num_features = data.feature_names.size();

  std::set<std::pair<std::vector<double>, int>> seen;
  std::set<std::string> label_values;
  std::vector<double> x(data.num_features);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, fields] = records[r];
    if (fields.size() != header.size()) {
      throw ParseError(line, fields.size() < header.size() ? header[fields.size()] : std::string("<extra>"),
                       "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    std::size_t k = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == label_index) continue;
      double v = 0.0;
      if (!detail::parse_number(fields[c], v) || !std::isfinite(v)) {
        throw ParseError(line, header[c], "cannot parse '" + fields[c] + "' as a finite number");
      }
      x[k++] = v;
    }
    const std::string& label = fields[label_index];
    if (label.empty()) throw ParseError(line, header[label_index], "empty label");
    label_values.insert(label);
    if (label_values.size() > 2) {
      throw ParseError(line, header[label_index], "more than two distinct labels");
    }
    const int y = label == positive_label ? 1 : -1;
    if (!seen.emplace(x, y).second) continue;
    data.push_back(x, y);
  }
  if (data.size() < 2) throw Error(ErrorCode::InsufficientSamples, "need at least two distinct rows");
  if (data.count_label(1) == 0 || data.count_label(-1) == 0) {
    throw Error(ErrorCode::SingleClassData, "labels take a single value after mapping '" +
                                                std::string(positive_label) + "' to +1");
  }
  return data;
}

LabeledDataset load_csv(const std::string& path, std::string_view label_column, std::string_view positive_label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), label_column, positive_label);
}

std::string to_csv(const LabeledDataset& data) {
  std::ostringstream out;
  for (std::size_t j = 0; j < data.num_features; ++j) {
    if (j < data.feature_names.size()) {
      out << data.feature_names[j];
    } else {
      out << 'x' << j;
    }
    out << ',';
  }
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << detail::format_number(v) << ',';
    out << data.labels[i] << '\n';
  }
  return out.str();
}

void write_csv(const std::string& path, const LabeledDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << to_csv(data);
}

std::vector<FeatureStats> compute_statistics(const LabeledDataset& data) {
  const std::size_t n = data.size();
  std::vector<FeatureStats> stats(data.num_features);
  for (std::size_t j = 0; j < data.num_features; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += data.row(i)[j];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = data.row(i)[j] - mean;
      ss += d * d;
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    stats[j].mean = mean;
    stats[j].std = sd;
    stats[j].constant = !(sd > 1e-12 * (1.0 + std::abs(mean)));
  }
  return stats;
}

LabeledDataset apply_standardization(const LabeledDataset& data, const std::vector<FeatureStats>& stats) {
  if (stats.size() != data.num_features) throw Error(ErrorCode::DimensionMismatch, "statistics width");
  LabeledDataset out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto x = out.row(i);
    for (std::size_t j = 0; j < out.num_features; ++j) {
      x[j] = stats[j].constant ? 0.0 : (x[j] - stats[j].mean) / stats[j].std;
    }
  }
  out.standardization = stats;
  return out;
}

LabeledDataset standardize(const LabeledDataset& data) { return apply_standardization(data, compute_statistics(data)); }

namespace {

using ClassCounts = std::array<std::size_t, 2>;  // index 0: label +1, index 1: label -1

/// Positives for the parts drawn so far, rounded from the running exact share
/// of `drawn` rows. Each part then differs from its exact share by less
/// than one, and the running total never exceeds what a class has.
std::size_t cumulative_positives(std::size_t drawn, const ClassCounts& full) {
  const double n = static_cast<double>(full[0] + full[1]);
  const double exact = static_cast<double>(drawn) * static_cast<double>(full[0]) / n;
  return static_cast<std::size_t>(std::floor(exact + 0.5));
}

}  // namespace

SplitSpec stratified_split(const LabeledDataset& data, std::size_t train_size, std::size_t val_size,
                           double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigError, "test_fraction must lie in [0, 1)");
  }
  const std::size_t n = data.size();
  const auto test_size = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
  if (test_size + train_size + val_size > n) {
    throw Error(ErrorCode::InsufficientSamples, "requested " + std::to_string(test_size + train_size + val_size) +
                                                    " rows from " + std::to_string(n));
  }

  std::array<std::vector<std::size_t>, 2> pools;
  for (std::size_t i = 0; i < n; ++i) pools[data.labels[i] == 1 ? 0 : 1].push_back(i);
  const ClassCounts full{pools[0].size(), pools[1].size()};

  SplitMix64 rng(seed);
  for (auto& pool : pools) {
    for (std::size_t i = pool.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i));
      std::swap(pool[i - 1], pool[j]);
    }
  }

  SplitSpec split;
  split.seed = seed;
  ClassCounts used{0, 0};
  std::size_t drawn = 0;
  const auto draw = [&](std::size_t part, std::vector<std::size_t>& out, const char* name) {
    drawn += part;
    const std::size_t positive = cumulative_positives(drawn, full);
    const ClassCounts q{positive - used[0], part - (positive - used[0])};
    for (int c = 0; c < 2; ++c) {
      for (std::size_t k = 0; k < q[c]; ++k) out.push_back(pools[c][used[c] + k]);
      used[c] += q[c];
    }
    std::sort(out.begin(), out.end());
    if (part >= 2 && full[0] > 0 && full[1] > 0 && (q[0] == 0 || q[1] == 0)) {
      split.warnings.push_back(std::string(name) + " part is single-class");
    }
  };
  draw(test_size, split.test_idx, "test");
  draw(train_size, split.train_idx, "train");
  draw(val_size, split.val_idx, "validation");
  return split;
}

std::string to_json(const SplitSpec& split) {
  nlohmann::ordered_json j;
  j["seed"] = split.seed;
  j["train_idx"] = split.train_idx;
  j["val_idx"] = split.val_idx;
  j["test_idx"] = split.test_idx;
  return j.dump();
}

}  // namespace bltune
