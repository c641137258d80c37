#include <algorithm>
#include <cmath>
#include <numeric>

#include "bltune/bilevel.hpp"
#include "bltune/error.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"

using namespace bltune;

namespace {

SvmModel unit_model() {
  SvmModel m;
  m.w = {1.0};
  m.b = 0.0;
  return m;
}

LabeledDataset points(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
  LabeledDataset d;
  d.num_features = xs.front().size();
  for (std::size_t i = 0; i < xs.size(); ++i) d.push_back(xs[i], ys[i]);
  return d;
}

}  // namespace

TEST_CASE("hinge loss examples") {
  const SvmModel m = unit_model();
  CHECK(hinge_loss(m, std::vector<double>{2.0}, 1) == 0.0);
  CHECK(hinge_loss(m, std::vector<double>{0.0}, 1) == 1.0);
  CHECK(hinge_loss(m, std::vector<double>{0.5}, -1) == 1.5);
  CHECK_THROWS_AS(hinge_loss(m, std::vector<double>{1.0, 2.0}, 1), Error);
}

TEST_CASE("zero-one margin loss is strict at the margin") {
  const SvmModel m = unit_model();
  CHECK(zero_one_margin_loss(m, std::vector<double>{2.0}, 1) == 0);
  CHECK(zero_one_margin_loss(m, std::vector<double>{1.0}, 1) == 0);
  CHECK(zero_one_margin_loss(m, std::vector<double>{0.99}, 1) == 1);
}

TEST_CASE("inner SVM closed forms") {
  const LabeledDataset balanced = points({{1.0}, {2.0}, {-1.0}, {-3.0}}, {1, -1, 1, -1});
  const InnerSvmResult zero_box = train_inner_svm(balanced, {0.0});
  CHECK(zero_box.objective == doctest::Approx(1.0));
  CHECK(zero_box.model.w[0] == 0.0);

  const LabeledDataset pair = points({{-1.0}, {1.0}}, {-1, 1});
  const InnerSvmResult fit = train_inner_svm(pair, {1.0});
  CHECK(fit.objective == doctest::Approx(0.0));
  CHECK(hinge_loss(fit.model, pair.row(0), -1) == doctest::Approx(0.0));
  CHECK(hinge_loss(fit.model, pair.row(1), 1) == doctest::Approx(0.0));
}

TEST_CASE("inner SVM matches vertex enumeration on 6-point 2-feature data") {
  testgen::Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const LabeledDataset train = testgen::random_dataset(rng, 6, 2, 0.5);
    const std::vector<double> w_bar{testgen::uniform(rng, 0.1, 1.5), testgen::uniform(rng, 0.1, 1.5)};
    const InnerSvmResult fit = train_inner_svm(train, w_bar, 20.0);
    const oracle::Result ref = oracle::enumerate_vertices(oracle::hinge_lp(train, w_bar, 20.0));
    REQUIRE(ref.feasible);
    CHECK(std::abs(fit.objective - ref.value) <= 1e-8);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(fit.model.w[j]) <= w_bar[j] + 1e-9);
  }
}

TEST_CASE("flip set membership") {
  const SvmModel m = unit_model();
  const LabeledDataset val = points({{0.5}, {2.0}, {-2.0}, {1.0}}, {1, 1, 1, -1});
  const FlipSets s = compute_flip_sets(m, val);
  CHECK(s.v1 == std::vector<std::size_t>{0});
  CHECK(s.v2 == std::vector<std::size_t>{1});
  CHECK(s.v3 == std::vector<std::size_t>{2, 3});
  CHECK(s.v_f == std::vector<std::size_t>{0, 2, 3});
  CHECK(compute_flip_sets(m, val, FlipMode::All).v_f.size() == 4);
  CHECK(compute_flip_sets(m, val, FlipMode::Threshold, 5).v_f.size() == 4);
  CHECK_THROWS_AS(compute_flip_sets(m, points({{1.0, 1.0}}, {1})), Error);
}

TEST_CASE("flip sets partition every validation set") {
  testgen::Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const LabeledDataset val = testgen::random_dataset(rng, 12, 3, 0.7);
    SvmModel m;
    m.w = {testgen::uniform(rng, -2, 2), testgen::uniform(rng, -2, 2), testgen::uniform(rng, -2, 2)};
    m.b = testgen::uniform(rng, -1, 1);
    const FlipSets s = compute_flip_sets(m, val);
    std::vector<int> seen(val.size(), 0);
    for (const auto* part : {&s.v1, &s.v2, &s.v3}) {
      for (std::size_t i : *part) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    int margin_errors = 0;
    for (std::size_t i = 0; i < val.size(); ++i) margin_errors += zero_one_margin_loss(m, val.row(i), val.labels[i]);
    CHECK(static_cast<std::size_t>(margin_errors) == s.v1.size() + s.v3.size());
  }
}

TEST_CASE("optimistic solve on validation equal to a separable train set") {
  const LabeledDataset train = points({{-2.0}, {-1.5}, {1.5}, {2.0}}, {-1, -1, 1, 1});
  const OptimisticSolution o = solve_optimistic(train, train, HyperBounds::uniform(1, 0.0, 5.0));
  CHECK(o.outer_objective == doctest::Approx(0.0));
  CHECK(o.kkt_residual <= 1e-6);
  CHECK_FALSE(o.stats.big_m_flagged);
}

TEST_CASE("fixed hyperparameters give the best inner-optimal model") {
  testgen::Rng rng(12);
  for (int t = 0; t < 5; ++t) {
    const LabeledDataset train = testgen::random_1d(rng, 5, 0.3);
    const LabeledDataset val = testgen::random_1d(rng, 3, 0.3);
    const OptimisticSolution o = solve_optimistic(train, val, HyperBounds::uniform(1, 0.4, 0.4));
    CHECK(o.w_bar[0] == doctest::Approx(0.4));
    const auto in = oracle::Instance1d::from(train, val, {}, 0.4, 0.4, 1000.0);
    CHECK(o.outer_objective == doctest::Approx(oracle::optimistic_at(in, 0.4)).epsilon(1e-6));
    CHECK(o.inner_objective == doctest::Approx(oracle::inner_value(in, 0.4)).epsilon(1e-7));
  }
}

TEST_CASE("one-feature optimistic and pessimistic solves match the arrangement oracle") {
  testgen::Rng rng(2024);
  for (int t = 0; t < 12; ++t) {
    const LabeledDataset train = testgen::random_1d(rng, 4, 0.25);
    const LabeledDataset val = testgen::random_1d(rng, 3, 0.25);
    const HyperBounds bounds = HyperBounds::uniform(1, 0.0, 1.0);
    const OptimisticSolution o = solve_optimistic(train, val, bounds);
    const FlipSets flip = compute_flip_sets(o.model, val, FlipMode::All);
    const auto in = oracle::Instance1d::from(train, val, flip.v_f, 0.0, 1.0, 1000.0);
    CHECK(std::abs(o.outer_objective - oracle::optimistic(in).value) <= 1e-4);

    const PessimisticSolution p = solve_pessimistic(train, val, bounds, 0.0, flip);
    // The replica only has to be feasible, so the exact comparison is at
    // the training-loss budget the solver chose.
    double budget = 0.0;
    for (double v : p.replica.xi) budget += v / static_cast<double>(train.size());
    CHECK(std::abs(p.outer_objective - oracle::pessimistic_at_level(in, p.w_bar_star[0], budget, false)) <= 1e-6);
    CHECK(p.outer_objective <= oracle::pessimistic(in, false).value + 1e-6);
    CHECK(p.kkt_residual <= 1e-6);
    CHECK(p.inner_certificate_gap <= 1e-6);
  }
}

TEST_CASE("pessimistic equals optimistic on separable data with a unique inner optimum") {
  const LabeledDataset train = points({{-2.0}, {-1.0}, {1.0}, {2.0}}, {-1, -1, 1, 1});
  const LabeledDataset val = points({{-1.5}, {1.5}}, {-1, 1});
  const HyperBounds bounds = HyperBounds::uniform(1, 0.0, 1.0);
  const OptimisticSolution o = solve_optimistic(train, val, bounds);
  const FlipSets flip = compute_flip_sets(o.model, val, FlipMode::All);
  const PessimisticSolution p = solve_pessimistic(train, val, bounds, 0.0, flip);
  CHECK(p.outer_objective == doctest::Approx(o.outer_objective).epsilon(1e-6));
}

TEST_CASE("pessimistic and worst-case values grow with epsilon") {
  testgen::Rng rng(99);
  for (int t = 0; t < 4; ++t) {
    const LabeledDataset train = testgen::random_1d(rng, 4, 0.25);
    const LabeledDataset val = testgen::random_1d(rng, 3, 0.25);
    const HyperBounds bounds = HyperBounds::uniform(1, 0.0, 1.0);
    const OptimisticSolution o = solve_optimistic(train, val, bounds);
    const FlipSets flip = compute_flip_sets(o.model, val, FlipMode::All);
    const auto in = oracle::Instance1d::from(train, val, flip.v_f, 0.0, 1.0, 1000.0);
    double prev_p = -1.0;
    double prev_w = -1.0;
    for (double eps : {0.0, 0.5}) {
      const PessimisticSolution p = solve_pessimistic(train, val, bounds, eps, flip);
      const WorstCaseResult w = evaluate_worst_case(o.w_bar, train, val, eps, flip);
      CHECK(p.outer_objective >= prev_p - 1e-6);
      CHECK(w.value >= prev_w - 1e-6);
      CHECK(p.outer_objective <= w.value + 1e-6);
      CHECK(std::abs(w.value - oracle::worst_case_at(in, o.w_bar[0], eps)) <= 1e-4);
      CHECK(w.flip_estimate <= w.value + 1e-9);
      prev_p = p.outer_objective;
      prev_w = w.value;
    }
  }
}

TEST_CASE("worst case with a unique inner optimum equals the optimistic loss") {
  // At w_bar = 1 the only zero-loss fit is w = 1, b = 0.
  const LabeledDataset train = points({{-2.0}, {-1.0}, {1.0}, {2.0}}, {-1, -1, 1, 1});
  const LabeledDataset val = points({{-0.5}, {1.5}}, {-1, 1});
  const SvmModel fit = train_inner_svm(train, {1.0}).model;
  const WorstCaseResult w = evaluate_worst_case({1.0}, train, val, 0.0, compute_flip_sets(fit, val, FlipMode::All));
  const oracle::Instance1d in = oracle::Instance1d::from(train, val, {0, 1}, 0.0, 1.0, 1000.0);
  CHECK(w.value == doctest::Approx(oracle::optimistic_at(in, 1.0)).epsilon(1e-6));
  CHECK(w.value == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("empty flip set is an error") {
  const LabeledDataset train = points({{-1.0}, {1.0}}, {-1, 1});
  FlipSets none;
  CHECK_THROWS_AS(solve_pessimistic(train, train, HyperBounds::uniform(1, 0, 1), 0.0, none), Error);
}

TEST_CASE("tune falls back when nothing is flipped") {
  const LabeledDataset train = points({{-2.0}, {-1.0}, {1.0}, {2.0}}, {-1, -1, 1, 1});
  const LabeledDataset val = points({{-3.0}, {3.0}}, {-1, 1});
  const TuneResult r = tune(train, val, HyperBounds::uniform(1, 0.0, 1.0), 0.0, FlipMode::MarginPlusMisclassified);
  CHECK(r.pessimistic_fallback);
  CHECK(r.pessimistic.outer_objective == r.optimistic.outer_objective);
}

TEST_CASE("accuracy conventions") {
  const LabeledDataset d = points({{1.0}, {2.0}, {-1.0}, {0.5}}, {1, 1, -1, -1});
  CHECK(accuracy(unit_model(), d) == doctest::Approx(0.75));
  SvmModel zero;
  zero.w = {0.0};
  CHECK(accuracy(zero, d) == 0.0);
  const LabeledDataset sep = points({{-1.0}, {1.0}}, {-1, 1});
  CHECK(accuracy(unit_model(), sep) == 1.0);
}

TEST_CASE("hyperparameter bounds validation") {
  CHECK_THROWS_AS(HyperBounds::uniform(2, 1.0, 0.5).validate(2), Error);
  CHECK_THROWS_AS(HyperBounds::uniform(2, -1.0, 0.5).validate(2), Error);
  CHECK_THROWS_AS(HyperBounds::uniform(2, 0.0, 0.5).validate(3), Error);
}

TEST_CASE("model JSON fields") {
  SvmModel m = unit_model();
  m.w_bar = {0.5};
  const std::string json = model_to_json(m, 0.25, 0.2, FlipMode::All, 7);
  for (const char* key : {"\"w\"", "\"b\"", "\"w_bar\"", "\"objective\"", "\"epsilon\"", "\"flip_mode\"", "\"seed\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
  CHECK(json.find("\"all\"") != std::string::npos);
  CHECK(parse_flip_mode(to_string(FlipMode::Threshold)) == FlipMode::Threshold);
}
