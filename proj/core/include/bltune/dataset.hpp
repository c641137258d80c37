#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bltune {

/// SplitMix64 (Steele, Lea, Flood 2014). State advances by the golden-gamma
/// 0x9E3779B97F4A7C15; each output is the state passed through the
/// variant-13 mixer. split() seeds a child generator from the next output.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform01();
  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  SplitMix64 split() { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

struct FeatureStats {
  double mean = 0.0;
  double std = 1.0;
  bool constant = false;
};

/// Row-major feature matrix with +1/-1 labels.
struct LabeledDataset {
  std::size_t num_features = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<FeatureStats> standardization;  // empty when raw

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  std::span<double> row(std::size_t i) { return {features.data() + i * num_features, num_features}; }
  void push_back(std::span<const double> x, int y);
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  std::size_t count_label(int y) const;
};

/// Parses CSV text with a header row. Every column other than the label
/// column is a numeric feature. Labels equal to positive_label map to +1,
/// everything else to -1. Exact duplicate (features, label) rows are
/// dropped, keeping the first.
LabeledDataset parse_csv(std::string_view text, std::string_view label_column, std::string_view positive_label);
LabeledDataset load_csv(const std::string& path, std::string_view label_column, std::string_view positive_label);

/// Feature-matrix CSV with a trailing `label` column holding +1/-1.
std::string to_csv(const LabeledDataset& data);
void write_csv(const std::string& path, const LabeledDataset& data);

/// Per-column mean and sample standard deviation (n - 1 denominator).
std::vector<FeatureStats> compute_statistics(const LabeledDataset& data);
/// z-scores every column with `stats`; constant columns become zero.
LabeledDataset apply_standardization(const LabeledDataset& data, const std::vector<FeatureStats>& stats);
LabeledDataset standardize(const LabeledDataset& data);

struct SplitSpec {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  /// Parts that came out single-class although the data has both classes.
  std::vector<std::string> warnings;
};

/// Draws the test part (ceil(test_fraction * n) rows) first, then the train
/// and validation parts from the rest. Every part gets per-class quotas by
/// largest-remainder rounding of the full-data class proportions, with a
/// class that would get zero rows bumped to one when the part has room.
SplitSpec stratified_split(const LabeledDataset& data, std::size_t train_size, std::size_t val_size,
                           double test_fraction, std::uint64_t seed);

std::string to_json(const SplitSpec& split);

}  // namespace bltune
