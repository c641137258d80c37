#include <algorithm>
#include <cmath>
#include <set>

#include "bltune/dataset.hpp"
#include "bltune/error.hpp"
#include "doctest.h"
#include "generators.hpp"

using namespace bltune;

namespace {

LabeledDataset balanced(std::size_t n) {
  LabeledDataset d;
  d.num_features = 2;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(std::vector<double>{static_cast<double>(i), static_cast<double>(i % 7)}, i % 2 == 0 ? 1 : -1);
  }
  return d;
}

std::size_t positives(const LabeledDataset& d, const std::vector<std::size_t>& idx) {
  return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return d.labels[i] == 1; }));
}

}  // namespace

TEST_CASE("duplicate rows are dropped keeping the first") {
  const LabeledDataset d = parse_csv("a,b,class\n1,2,x\n3,4,y\n1,2,x\n1,2,y\n", "class", "x");
  REQUIRE(d.size() == 3);
  CHECK(d.labels == std::vector<int>{1, -1, -1});
  CHECK(d.row(2)[0] == 1.0);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("string labels map to +1 and -1") {
  const LabeledDataset d = parse_csv("v,class\n1,malignant\n2,benign\n", "class", "malignant");
  CHECK(d.labels == std::vector<int>{1, -1});
}

TEST_CASE("parse errors name the row and column") {
  try {
    parse_csv("a,b,class\n1,2,x\n3,oops,y\n", "class", "x");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);  // file line, header is line 1
    CHECK(e.column() == "b");
  }
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n3,4\n", "class", "x"), Error);
  try {
    parse_csv("a,class\n1,x\n2,x\n", "class", "x");
    FAIL("expected SingleClassData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClassData);
  }
}

TEST_CASE("standardization with the sample deviation") {
  LabeledDataset d;
  d.num_features = 2;
  d.push_back(std::vector<double>{1.0, 5.0}, 1);
  d.push_back(std::vector<double>{3.0, 5.0}, -1);
  d.push_back(std::vector<double>{2.0, 5.0}, 1);
  const LabeledDataset s = standardize(d);
  CHECK(s.row(0)[0] == doctest::Approx(-1.0));
  CHECK(s.row(1)[0] == doctest::Approx(1.0));
  CHECK(s.row(0)[1] == 0.0);
  CHECK(s.standardization[1].constant);

  LabeledDataset two;
  two.num_features = 1;
  two.push_back(std::vector<double>{1.0}, 1);
  two.push_back(std::vector<double>{3.0}, -1);
  const LabeledDataset t = standardize(two);
  CHECK(t.row(0)[0] == doctest::Approx(-std::sqrt(0.5)));
  CHECK(t.row(1)[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(t.standardization[0].std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("standardization is idempotent") {
  testgen::Rng rng(1);
  const LabeledDataset d = standardize(testgen::random_dataset(rng, 40, 4, 1.0));
  const LabeledDataset again = standardize(d);
  for (std::size_t k = 0; k < d.features.size(); ++k) CHECK(std::abs(again.features[k] - d.features[k]) <= 1e-9);
  const auto stats = compute_statistics(d);
  for (const auto& s : stats) {
    CHECK(std::abs(s.mean) <= 1e-9);
    CHECK(std::abs(s.std - 1.0) <= 1e-9);
  }
}

TEST_CASE("exact stratification on a balanced set") {
  const LabeledDataset d = balanced(100);
  const SplitSpec s = stratified_split(d, 20, 10, 0.5, 42);
  CHECK(s.test_idx.size() == 50);
  CHECK(positives(d, s.test_idx) == 25);
  CHECK(s.train_idx.size() == 20);
  CHECK(positives(d, s.train_idx) == 10);
  CHECK(s.val_idx.size() == 10);
  CHECK(positives(d, s.val_idx) == 5);
  const SplitSpec again = stratified_split(d, 20, 10, 0.5, 42);
  CHECK(again.train_idx == s.train_idx);
  CHECK(again.val_idx == s.val_idx);
  CHECK(again.test_idx == s.test_idx);
  CHECK(to_json(s).find("\"train_idx\"") != std::string::npos);
}

TEST_CASE("splits are disjoint and stratified within one sample") {
  testgen::Rng rng(6);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = static_cast<std::size_t>(testgen::integer(rng, 20, 80));
    LabeledDataset d;
    d.num_features = 1;
    const double share = testgen::uniform(rng, 0.2, 0.8);
    for (std::size_t i = 0; i < n; ++i) {
      d.push_back(std::vector<double>{static_cast<double>(i)}, i < 2 ? (i == 0 ? 1 : -1) : (testgen::uniform(rng, 0, 1) < share ? 1 : -1));
    }
    const std::size_t rest = n - (n + 1) / 2;
    const std::size_t train = static_cast<std::size_t>(testgen::integer(rng, 2, static_cast<int>(rest) / 2));
    const std::size_t val = static_cast<std::size_t>(testgen::integer(rng, 2, static_cast<int>(rest - train)));
    const SplitSpec s = stratified_split(d, train, val, 0.5, rng());
    std::set<std::size_t> all;
    for (const auto* part : {&s.train_idx, &s.val_idx, &s.test_idx}) all.insert(part->begin(), part->end());
    CHECK(all.size() == s.train_idx.size() + s.val_idx.size() + s.test_idx.size());
    CHECK(*all.rbegin() < n);
    const double p = static_cast<double>(d.count_label(1)) / static_cast<double>(n);
    for (const auto* part : {&s.train_idx, &s.val_idx, &s.test_idx}) {
      const double expected = p * static_cast<double>(part->size());
      CHECK(std::abs(static_cast<double>(positives(d, *part)) - expected) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("oversized requests are rejected") {
  try {
    stratified_split(balanced(20), 8, 8, 0.5, 1);
    FAIL("expected InsufficientSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSamples);
  }
}

TEST_CASE("bundled breast cancer data") {
  const LabeledDataset d = load_csv(BLTUNE_DATA_DIR "/cancer.csv", "class", "malignant");
  CHECK(d.size() == 449);
  CHECK(d.num_features == 9);
  const SplitSpec s = stratified_split(d, 20, 10, 0.5, 0);
  CHECK(s.test_idx.size() == 225);
}

TEST_CASE("CSV round trip") {
  testgen::Rng rng(3);
  const LabeledDataset d = testgen::random_dataset(rng, 10, 3, 1.0);
  const LabeledDataset back = parse_csv(to_csv(d), "label", "1");
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);
}
