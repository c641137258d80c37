#include "bltune/bilevel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "bltune/error.hpp"
#include "json.hpp"
#include "model_builder.hpp"

namespace bltune {

using detail::ModelBuilder;

HyperBounds HyperBounds::uniform(std::size_t features, double lower, double upper) {
  return {std::vector<double>(features, lower), std::vector<double>(features, upper)};
}

void HyperBounds::validate(std::size_t features) const {
  if (lower.size() != features || upper.size() != features) {
    throw Error(ErrorCode::DimensionMismatch, "hyperparameter bounds have " + std::to_string(upper.size()) +
                                                  " entries for " + std::to_string(features) + " features");
  }
  for (std::size_t j = 0; j < features; ++j) {
    if (!(lower[j] >= 0.0) || !(lower[j] <= upper[j]) || !std::isfinite(upper[j])) {
      throw Error(ErrorCode::ConfigError, "hyperparameter bounds need 0 <= lower <= upper < inf");
    }
  }
}

double SvmModel::decision(std::span<const double> x) const {
  if (x.size() != w.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "point has " + std::to_string(x.size()) + " features, model has " + std::to_string(w.size()));
  }
  double f = -b;
  for (std::size_t j = 0; j < w.size(); ++j) f += x[j] * w[j];
  return f;
}

std::string_view to_string(FlipMode mode) {
  switch (mode) {
    case FlipMode::MarginPlusMisclassified: return "margin_plus_misclassified";
    case FlipMode::All: return "all";
    case FlipMode::Threshold: return "threshold";
  }
  return "unknown";
}

FlipMode parse_flip_mode(std::string_view text) {
  if (text == "margin_plus_misclassified") return FlipMode::MarginPlusMisclassified;
  if (text == "all") return FlipMode::All;
  if (text == "threshold") return FlipMode::Threshold;
  throw Error(ErrorCode::ConfigError, "unknown flip_mode '" + std::string(text) + "'");
}

double hinge_loss(const SvmModel& model, std::span<const double> x, int y) {
  return std::max(0.0, 1.0 - y * model.decision(x));
}

int zero_one_margin_loss(const SvmModel& model, std::span<const double> x, int y) {
  return y * model.decision(x) < 1.0 ? 1 : 0;
}

double mean_hinge_loss(const SvmModel& model, const LabeledDataset& data) {
  if (data.size() == 0) throw Error(ErrorCode::InsufficientSamples, "empty data");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += hinge_loss(model, data.row(i), data.labels[i]);
  return total / static_cast<double>(data.size());
}

double accuracy(const SvmModel& model, const LabeledDataset& data) {
  if (data.size() == 0) throw Error(ErrorCode::InsufficientSamples, "empty data");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] * model.decision(data.row(i)) > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

using Clock = std::chrono::steady_clock;

void check_inputs(const LabeledDataset& train, const LabeledDataset& validation) {
  if (train.size() == 0) throw Error(ErrorCode::InsufficientSamples, "training set is empty");
  if (validation.size() == 0) throw Error(ErrorCode::InsufficientSamples, "validation set is empty");
  if (train.num_features != validation.num_features) {
    throw Error(ErrorCode::DimensionMismatch, "training and validation feature counts differ");
  }
}

/// max |x^T w| over the box |w_j| <= ub_j.
double reach(std::span<const double> x, const std::vector<double>& ub) {
  double r = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) r += std::abs(x[j]) * ub[j];
  return r;
}

bool both_classes(const LabeledDataset& data) { return data.count_label(1) > 0 && data.count_label(-1) > 0; }

/// y (x^T w - b) as an affine expression over consecutive w columns and b.
AffineExpr margin(std::span<const double> x, int y, std::size_t w0, std::size_t b) {
  AffineExpr e;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) e.terms.emplace_back(w0 + j, y * x[j]);
  }
  e.terms.emplace_back(b, -static_cast<double>(y));
  return e;
}

AffineExpr plus_var(AffineExpr e, std::size_t j, double coef = 1.0) {
  e.terms.emplace_back(j, coef);
  return e;
}

AffineExpr var(std::size_t j, double coef = 1.0) { return AffineExpr::variable(j, coef); }

AffineExpr diff(std::size_t a, std::size_t b_index, double sign) {
  // a + sign * b
  return AffineExpr{{{a, 1.0}, {b_index, sign}}, 0.0};
}

struct Guarded {
  MipProblem problem;
  std::vector<ComplementarityPair> pairs;
  MipSolution solution;
  double scale = 1.0;
};

enum class Flag { None, Soft, Hard };

/// Builds and solves with M scale 1, 2, 4, ... until the guard is quiet or
/// the retries run out. Soft flags (an M or heuristic cap reached) are
/// cleared once doubling no longer lowers the objective, or when the
/// objective is already zero; hard flags are only cleared by a quiet solve.
/// Points over the model variables (no binaries) used to seed the search.
using StartFn = std::function<std::vector<std::vector<double>>()>;

/// Extends a point to the binaries: z = 1 where p is the positive side.
std::vector<double> with_binaries(std::vector<double> x, const MipProblem& problem,
                                  const std::vector<ComplementarityPair>& pairs) {
  x.resize(problem.base.num_variables(), 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    x[problem.binaries[k]] = pairs[k].p.evaluate(x) > pairs[k].q.evaluate(x) ? 1.0 : 0.0;
  }
  return x;
}

Guarded solve_guarded(const std::function<ModelBuilder(double)>& make,
                      const std::function<Flag(const std::vector<double>&)>& extra_flag, const StartFn& starts,
                      const BilevelSettings& settings, MipStats& stats, const char* what) {
  const auto start = Clock::now();
  Guarded out;
  bool have_previous = false;
  double previous = 0.0;
  for (int attempt = 0; attempt <= settings.big_m_retries; ++attempt) {
    out.scale = std::ldexp(1.0, attempt);
    ModelBuilder builder = make(out.scale);
    out.problem = builder.build();
    out.pairs = builder.pairs();
    std::vector<std::vector<double>> seeds;
    if (starts) {
      for (auto& x : starts()) seeds.push_back(with_binaries(std::move(x), out.problem, out.pairs));
    }
    out.solution = solve_mip(out.problem, settings.mip, seeds);
    stats.binaries = out.problem.binaries.size();
    stats.rows = out.problem.base.num_rows();
    stats.columns = out.problem.base.num_variables();
    stats.node_count += out.solution.node_count;
    stats.lp_iterations += out.solution.lp_iterations;
    if (out.solution.status != MipStatus::Optimal) {
      if (attempt < settings.big_m_retries) {
        ++stats.big_m_doublings;
        have_previous = false;
        continue;
      }
      throw Error(ErrorCode::InfeasibleModel, std::string(what) + " MIP is infeasible");
    }
    Flag flag = validate_big_m(out.problem, out.solution, out.pairs).any_flagged ? Flag::Soft : Flag::None;
    if (extra_flag) flag = std::max(flag, extra_flag(out.solution.primal));
    const double objective = out.solution.objective_value;
    if (flag == Flag::Soft) {
      const bool stable = have_previous && std::abs(previous - objective) <= 1e-7 * (1.0 + std::abs(objective));
      if (stable || std::abs(objective) <= 1e-12) flag = Flag::None;
    }
    stats.big_m_flagged = flag != Flag::None;
    if (!stats.big_m_flagged || attempt == settings.big_m_retries) break;
    have_previous = true;
    previous = objective;
    ++stats.big_m_doublings;
  }
  stats.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

/// Hyperparameters read off a MIP solution, clipped into their box so that
/// round-off never leaves a negative width.
std::vector<double> read_w_bar(const std::vector<double>& x, std::size_t first, const HyperBounds& bounds) {
  std::vector<double> out(bounds.upper.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::clamp(x[first + j], bounds.lower[j], bounds.upper[j]);
  return out;
}

double max_pair_residual(const std::vector<ComplementarityPair>& pairs, const std::vector<double>& x) {
  double worst = 0.0;
  for (const auto& pair : pairs) worst = std::max(worst, std::min(pair.p.evaluate(x), pair.q.evaluate(x)));
  return worst;
}

}  // namespace

InnerSvmResult train_inner_svm(const LabeledDataset& train, const std::vector<double>& w_bar,
                               double intercept_bound) {
  const std::size_t p = train.num_features;
  const std::size_t n = train.size();
  if (n == 0) throw Error(ErrorCode::InsufficientSamples, "training set is empty");
  if (w_bar.size() != p) throw Error(ErrorCode::DimensionMismatch, "w_bar width differs from feature count");
  for (double v : w_bar) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::ConfigError, "w_bar must be finite and >= 0");
  }

  LinearProgram lp;
  const std::size_t b = p;
  const std::size_t xi0 = p + 1;
  lp.objective.assign(p + 1 + n, 0.0);
  lp.bounds.resize(p + 1 + n);
  for (std::size_t j = 0; j < p; ++j) lp.bounds[j] = {-w_bar[j], w_bar[j]};
  lp.bounds[b] = {-intercept_bound, intercept_bound};
  for (std::size_t i = 0; i < n; ++i) {
    lp.objective[xi0 + i] = 1.0 / static_cast<double>(n);
    lp.bounds[xi0 + i] = {0.0, kInfinity};
    Constraint row;
    row.coefficients.assign(p + 1 + n, 0.0);
    const auto x = train.row(i);
    const double y = train.labels[i];
    for (std::size_t j = 0; j < p; ++j) row.coefficients[j] = y * x[j];
    row.coefficients[b] = -y;
    row.coefficients[xi0 + i] = 1.0;
    row.relation = Relation::GreaterEqual;
    row.rhs = 1.0;
    lp.rows.push_back(std::move(row));
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal) {
    throw Error(ErrorCode::NumericalFailure, "inner SVM LP returned " + std::string(to_string(sol.status)));
  }
  InnerSvmResult out;
  out.model.w.assign(sol.primal.begin(), sol.primal.begin() + static_cast<std::ptrdiff_t>(p));
  out.model.b = sol.primal[b];
  out.model.xi.assign(sol.primal.begin() + static_cast<std::ptrdiff_t>(xi0), sol.primal.end());
  out.model.w_bar = w_bar;
  out.objective = sol.objective_value;
  return out;
}

FlipSets compute_flip_sets(const SvmModel& reference, const LabeledDataset& validation, FlipMode mode,
                           std::size_t train_size) {
  FlipSets sets;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const double f = reference.decision(validation.row(i));
    if (std::abs(f) < 1.0) {
      sets.v1.push_back(i);
    } else if (validation.labels[i] * f >= 1.0) {
      sets.v2.push_back(i);
    } else {
      sets.v3.push_back(i);
    }
  }
  bool flip_all = mode == FlipMode::All;
  if (mode == FlipMode::Threshold) flip_all = !(train_size > 20 && validation.size() > 15);
  if (flip_all) {
    sets.v_f.resize(validation.size());
    std::iota(sets.v_f.begin(), sets.v_f.end(), std::size_t{0});
  } else {
    sets.v_f = sets.v1;
    sets.v_f.insert(sets.v_f.end(), sets.v3.begin(), sets.v3.end());
    std::sort(sets.v_f.begin(), sets.v_f.end());
  }
  return sets;
}

OptimisticSolution solve_optimistic(const LabeledDataset& train, const LabeledDataset& validation,
                                    const HyperBounds& bounds, const BilevelSettings& settings) {
  check_inputs(train, validation);
  const std::size_t p = train.num_features;
  bounds.validate(p);
  const std::size_t nT = train.size();
  const std::size_t nV = validation.size();
  const double invT = 1.0 / static_cast<double>(nT);
  const auto& ub = bounds.upper;

  std::vector<double> rT(nT);
  double max_r = 0.0;
  for (std::size_t i = 0; i < nT; ++i) {
    rT[i] = reach(train.row(i), ub);
    max_r = std::max(max_r, rT[i]);
  }
  // With both classes present some inner optimum has |b| <= max reach + 1.
  const double Bb = both_classes(train) ? std::min(settings.intercept_bound, max_r + 1.0) : settings.intercept_bound;
  std::vector<double> S(p, 0.0);
  for (std::size_t i = 0; i < nT; ++i) {
    for (std::size_t j = 0; j < p; ++j) S[j] += std::abs(train.row(i)[j]) * invT;
  }

  struct Layout {
    std::size_t wbar, w, b, xi, g, beta, mup, mum;
  } at{};
  std::vector<std::size_t> stationarity_rows;

  const auto make = [&](double scale) {
    const double h = settings.big_m_headroom * scale;
    ModelBuilder mb;
    at.wbar = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(bounds.lower[j], ub[j]);
    at.w = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(-ub[j], ub[j]);
    at.b = mb.add_variable(-Bb, Bb);
    at.xi = mb.num_variables();
    for (std::size_t i = 0; i < nT; ++i) mb.add_variable(0.0, 1.0 + rT[i] + Bb);
    at.g = mb.add_variables(nV, 0.0, kInfinity, 1.0 / static_cast<double>(nV));
    at.beta = mb.add_variables(nT, 0.0, invT);
    at.mup = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(0.0, S[j]);
    at.mum = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(0.0, S[j]);

    for (std::size_t i = 0; i < nV; ++i) {
      mb.add_row(plus_var(margin(validation.row(i), validation.labels[i], at.w, at.b), at.g + i),
                 Relation::GreaterEqual, 1.0);
    }
    for (std::size_t i = 0; i < nT; ++i) {
      mb.add_row(plus_var(margin(train.row(i), train.labels[i], at.w, at.b), at.xi + i), Relation::GreaterEqual,
                 1.0);
    }
    for (std::size_t j = 0; j < p; ++j) {
      mb.add_row(diff(at.wbar + j, at.w + j, -1.0), Relation::GreaterEqual, 0.0);
      mb.add_row(diff(at.wbar + j, at.w + j, 1.0), Relation::GreaterEqual, 0.0);
    }
    stationarity_rows.clear();
    for (std::size_t j = 0; j < p; ++j) {
      AffineExpr e;
      for (std::size_t i = 0; i < nT; ++i) {
        const double a = train.labels[i] * train.row(i)[j];
        if (a != 0.0) e.terms.emplace_back(at.beta + i, -a);
      }
      e.terms.emplace_back(at.mup + j, 1.0);
      e.terms.emplace_back(at.mum + j, -1.0);
      stationarity_rows.push_back(mb.num_rows());
      mb.add_row(e, Relation::Equal, 0.0);
    }
    {
      AffineExpr e;
      for (std::size_t i = 0; i < nT; ++i) e.terms.emplace_back(at.beta + i, train.labels[i]);
      stationarity_rows.push_back(mb.num_rows());
      mb.add_row(e, Relation::Equal, 0.0);
    }

    for (std::size_t i = 0; i < nT; ++i) {
      AffineExpr slack = plus_var(margin(train.row(i), train.labels[i], at.w, at.b), at.xi + i);
      slack.constant = -1.0;
      AffineExpr dual_gap{{{at.beta + i, -1.0}}, invT};
      mb.add_pair(var(at.xi + i), dual_gap, h * (1.0 + rT[i] + Bb), h * invT, "xi/beta-cap");
      mb.add_pair(var(at.beta + i), slack, h * invT, h * (rT[i] + Bb), "beta/margin");
    }
    for (std::size_t j = 0; j < p; ++j) {
      mb.add_pair(var(at.mup + j), diff(at.wbar + j, at.w + j, -1.0), h * S[j], h * 2.0 * ub[j], "mu+/box");
      mb.add_pair(var(at.mum + j), diff(at.wbar + j, at.w + j, 1.0), h * S[j], h * 2.0 * ub[j], "mu-/box");
    }
    return mb;
  };

  OptimisticSolution out;
  const Guarded solved = solve_guarded(make, nullptr, nullptr, settings, out.stats, "optimistic");
  const auto& x = solved.solution.primal;
  out.w_bar = read_w_bar(x, at.wbar, bounds);
  out.model.w.assign(x.begin() + static_cast<std::ptrdiff_t>(at.w), x.begin() + static_cast<std::ptrdiff_t>(at.w + p));
  out.model.b = x[at.b];
  out.model.xi.assign(x.begin() + static_cast<std::ptrdiff_t>(at.xi),
                      x.begin() + static_cast<std::ptrdiff_t>(at.xi + nT));
  out.model.w_bar = out.w_bar;
  out.outer_objective = mean_hinge_loss(out.model, validation);
  out.inner_objective = mean_hinge_loss(out.model, train);

  double residual = max_pair_residual(solved.pairs, x);
  for (std::size_t r : stationarity_rows) {
    const auto& row = solved.problem.base.rows[r];
    double lhs = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) lhs += row.coefficients[j] * x[j];
    residual = std::max(residual, std::abs(lhs - row.rhs));
  }
  out.kkt_residual = residual;
  return out;
}

PessimisticSolution solve_pessimistic(const LabeledDataset& train, const LabeledDataset& validation,
                                      const HyperBounds& bounds, double epsilon, const FlipSets& flip,
                                      const BilevelSettings& settings,
                                      const std::vector<std::vector<double>>& w_bar_hints) {
  check_inputs(train, validation);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::ConfigError, "epsilon must be >= 0");
  if (flip.v_f.empty()) throw Error(ErrorCode::EmptyFlipSet, "flip set is empty");
  for (std::size_t i : flip.v_f) {
    if (i >= validation.size()) throw Error(ErrorCode::DimensionMismatch, "flip index out of range");
  }
  const std::size_t p = train.num_features;
  bounds.validate(p);
  const std::size_t nT = train.size();
  const std::size_t nV = validation.size();
  const std::size_t nF = flip.v_f.size();
  const double invT = 1.0 / static_cast<double>(nT);
  const double invF = 1.0 / static_cast<double>(nF);
  const auto& ub = bounds.upper;

  std::vector<double> rT(nT);
  std::vector<double> rF(nF);
  double max_r = 0.0;
  for (std::size_t i = 0; i < nT; ++i) max_r = std::max(max_r, rT[i] = reach(train.row(i), ub));
  for (std::size_t k = 0; k < nF; ++k) max_r = std::max(max_r, rF[k] = reach(validation.row(flip.v_f[k]), ub));
  std::vector<double> abs_sum_T(p, 0.0);
  std::vector<double> abs_sum_F(p, 0.0);
  for (std::size_t i = 0; i < nT; ++i) {
    for (std::size_t j = 0; j < p; ++j) abs_sum_T[j] += std::abs(train.row(i)[j]);
  }
  for (std::size_t k = 0; k < nF; ++k) {
    for (std::size_t j = 0; j < p; ++j) abs_sum_F[j] += std::abs(validation.row(flip.v_f[k])[j]);
  }

  struct Layout {
    std::size_t wbar, what, bhat, xihat, w, b, v, xi, g, alpha, beta, lambda, mup, mum;
  } at{};
  std::vector<std::size_t> stationarity_rows;
  double Bb = 0.0;
  // The replica only sets the loss budget; an optimal replica exists with
  // |b_hat| <= max reach over T + 1, so its box never needs to grow.
  double max_rT = 0.0;
  for (double r : rT) max_rT = std::max(max_rT, r);
  const double Bb_rep =
      both_classes(train) ? std::min(settings.intercept_bound, max_rT + 1.0) : settings.intercept_bound;
  double cap_total = 0.0;

  // Seeds: for a fixed w_bar the replica is the trained SVM and the
  // adversary the flipped inner LP, whose duals supply the multipliers.
  struct Seed {
    std::vector<double> w_bar;
    SvmModel replica;
    LpSolution inner;
  };
  std::vector<Seed> seeds;
  std::size_t box_rows = 0;
  std::size_t budget_row = 0;
  std::vector<std::vector<double>> candidates = w_bar_hints;
  candidates.push_back(bounds.upper);
  candidates.push_back(bounds.lower);
  const auto make_seeds = [&](double replica_intercept, double intercept) {
    seeds.clear();
    for (const auto& wb : candidates) {
      if (wb.size() != p) throw Error(ErrorCode::DimensionMismatch, "w_bar hint width differs from feature count");
      Seed seed{wb, train_inner_svm(train, wb, replica_intercept).model, {}};
      double budget = 0.0;
      for (double s : seed.replica.xi) budget += (1.0 + epsilon) * s * invT;

      // Columns: w (p, free), b, v (nF), xi (nT).
      const std::size_t nvar = p + 1 + nF + nT;
      LinearProgram lp;
      lp.objective.assign(nvar, 0.0);
      lp.bounds.assign(nvar, {0.0, kInfinity});
      for (std::size_t j = 0; j < p; ++j) lp.bounds[j] = {-kInfinity, kInfinity};
      lp.bounds[p] = {-intercept, intercept};
      for (std::size_t k = 0; k < nF; ++k) lp.objective[p + 1 + k] = invF;
      const auto row = [&](std::vector<std::pair<std::size_t, double>> terms, double rhs) {
        Constraint c;
        c.coefficients.assign(nvar, 0.0);
        for (const auto& [j, a] : terms) c.coefficients[j] += a;
        c.relation = Relation::GreaterEqual;
        c.rhs = rhs;
        lp.rows.push_back(std::move(c));
      };
      const auto hinge = [&](std::span<const double> xr, double y, std::size_t slack) {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t j = 0; j < p; ++j) terms.emplace_back(j, y * xr[j]);
        terms.emplace_back(p, -y);
        terms.emplace_back(slack, 1.0);
        row(std::move(terms), 1.0);
      };
      for (std::size_t k = 0; k < nF; ++k) {
        hinge(validation.row(flip.v_f[k]), -validation.labels[flip.v_f[k]], p + 1 + k);
      }
      box_rows = lp.rows.size();
      for (std::size_t j = 0; j < p; ++j) row({{j, -1.0}}, -wb[j]);
      for (std::size_t j = 0; j < p; ++j) row({{j, 1.0}}, -wb[j]);
      budget_row = lp.rows.size();
      {
        std::vector<std::pair<std::size_t, double>> terms;
        for (std::size_t i = 0; i < nT; ++i) terms.emplace_back(p + 1 + nF + i, -invT);
        row(std::move(terms), -budget - 1e-12);
      }
      for (std::size_t i = 0; i < nT; ++i) hinge(train.row(i), train.labels[i], p + 1 + nF + i);
      seed.inner = solve_lp(lp);
      if (seed.inner.status == LpStatus::Optimal) seeds.push_back(std::move(seed));
    }
  };
  const auto starts = [&]() {
    std::vector<std::vector<double>> out;
    for (const auto& seed : seeds) {
      const auto& sol = seed.inner;
      std::vector<double> x(at.mum + p, 0.0);
      for (std::size_t j = 0; j < p; ++j) {
        x[at.wbar + j] = seed.w_bar[j];
        x[at.what + j] = seed.replica.w[j];
        x[at.w + j] = std::clamp(sol.primal[j], -seed.w_bar[j], seed.w_bar[j]);
        x[at.mup + j] = sol.duals[box_rows + j];
        x[at.mum + j] = sol.duals[box_rows + p + j];
      }
      x[at.bhat] = seed.replica.b;
      x[at.b] = sol.primal[p];
      for (std::size_t i = 0; i < nT; ++i) {
        x[at.xihat + i] = seed.replica.xi[i];
        x[at.xi + i] = sol.primal[p + 1 + nF + i];
        x[at.beta + i] = sol.duals[budget_row + 1 + i];
      }
      for (std::size_t k = 0; k < nF; ++k) {
        x[at.v + k] = sol.primal[p + 1 + k];
        x[at.alpha + k] = sol.duals[k];
      }
      x[at.lambda] = sol.duals[budget_row];
      out.push_back(std::move(x));
    }
    return out;
  };

  const auto make = [&](double scale) {
    const double h = settings.big_m_headroom * scale;
    Bb = std::min(settings.intercept_bound, scale * (max_r + 1.0));
    make_seeds(Bb_rep, Bb);
    // The multiplier cap must at least admit the seeds' multipliers.
    double seed_lambda = 0.0;
    for (const auto& seed : seeds) seed_lambda = std::max(seed_lambda, seed.inner.duals[budget_row]);
    const double Lambda = scale * std::max(settings.loss_multiplier_cap, settings.big_m_headroom * seed_lambda);
    cap_total = 0.0;
    for (std::size_t i = 0; i < nT; ++i) cap_total += 1.0 + rT[i] + Bb_rep;

    ModelBuilder mb;
    at.wbar = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(bounds.lower[j], ub[j]);
    at.what = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(-ub[j], ub[j]);
    at.bhat = mb.add_variable(-Bb_rep, Bb_rep);
    at.xihat = mb.num_variables();
    for (std::size_t i = 0; i < nT; ++i) mb.add_variable(0.0, 1.0 + rT[i] + Bb_rep);
    at.w = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(-ub[j], ub[j]);
    at.b = mb.add_variable(-Bb, Bb);
    at.v = mb.num_variables();
    for (std::size_t k = 0; k < nF; ++k) mb.add_variable(0.0, 1.0 + rF[k] + Bb);
    at.xi = mb.num_variables();
    for (std::size_t i = 0; i < nT; ++i) mb.add_variable(0.0, 1.0 + rT[i] + Bb);
    at.g = mb.add_variables(nV, 0.0, kInfinity, 1.0 / static_cast<double>(nV));
    at.alpha = mb.add_variables(nF, 0.0, invF);
    at.beta = mb.add_variables(nT, 0.0, Lambda * invT);
    at.lambda = mb.add_variable(0.0, Lambda);
    std::vector<double> mu_cap(p);
    for (std::size_t j = 0; j < p; ++j) mu_cap[j] = invF * abs_sum_F[j] + Lambda * invT * abs_sum_T[j];
    at.mup = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(0.0, mu_cap[j]);
    at.mum = mb.num_variables();
    for (std::size_t j = 0; j < p; ++j) mb.add_variable(0.0, mu_cap[j]);

    // Outer level.
    for (std::size_t i = 0; i < nV; ++i) {
      mb.add_row(plus_var(margin(validation.row(i), validation.labels[i], at.w, at.b), at.g + i),
                 Relation::GreaterEqual, 1.0);
    }
    for (std::size_t j = 0; j < p; ++j) {
      mb.add_row(diff(at.wbar + j, at.what + j, -1.0), Relation::GreaterEqual, 0.0);
      mb.add_row(diff(at.wbar + j, at.what + j, 1.0), Relation::GreaterEqual, 0.0);
    }
    for (std::size_t i = 0; i < nT; ++i) {
      mb.add_row(plus_var(margin(train.row(i), train.labels[i], at.what, at.bhat), at.xihat + i),
                 Relation::GreaterEqual, 1.0);
    }
    {
      AffineExpr e;
      for (std::size_t i = 0; i < nT; ++i) e.terms.emplace_back(at.xihat + i, 1.0 + epsilon);
      mb.add_row(e, Relation::LessEqual, cap_total);
    }

    // Inner primal.
    for (std::size_t k = 0; k < nF; ++k) {
      const std::size_t i = flip.v_f[k];
      mb.add_row(plus_var(margin(validation.row(i), -validation.labels[i], at.w, at.b), at.v + k),
                 Relation::GreaterEqual, 1.0);
    }
    for (std::size_t j = 0; j < p; ++j) {
      mb.add_row(diff(at.wbar + j, at.w + j, -1.0), Relation::GreaterEqual, 0.0);
      mb.add_row(diff(at.wbar + j, at.w + j, 1.0), Relation::GreaterEqual, 0.0);
    }
    AffineExpr loss_room;
    for (std::size_t i = 0; i < nT; ++i) {
      loss_room.terms.emplace_back(at.xihat + i, (1.0 + epsilon) * invT);
      loss_room.terms.emplace_back(at.xi + i, -invT);
    }
    mb.add_row(loss_room, Relation::GreaterEqual, 0.0);
    for (std::size_t i = 0; i < nT; ++i) {
      mb.add_row(plus_var(margin(train.row(i), train.labels[i], at.w, at.b), at.xi + i), Relation::GreaterEqual,
                 1.0);
    }

    // Stationarity and dual feasibility.
    stationarity_rows.clear();
    for (std::size_t j = 0; j < p; ++j) {
      AffineExpr e;
      for (std::size_t k = 0; k < nF; ++k) {
        const std::size_t i = flip.v_f[k];
        const double a = -validation.labels[i] * validation.row(i)[j];
        if (a != 0.0) e.terms.emplace_back(at.alpha + k, -a);
      }
      for (std::size_t i = 0; i < nT; ++i) {
        const double a = train.labels[i] * train.row(i)[j];
        if (a != 0.0) e.terms.emplace_back(at.beta + i, -a);
      }
      e.terms.emplace_back(at.mup + j, 1.0);
      e.terms.emplace_back(at.mum + j, -1.0);
      stationarity_rows.push_back(mb.num_rows());
      mb.add_row(e, Relation::Equal, 0.0);
    }
    {
      AffineExpr e;
      for (std::size_t k = 0; k < nF; ++k) e.terms.emplace_back(at.alpha + k, -validation.labels[flip.v_f[k]]);
      for (std::size_t i = 0; i < nT; ++i) e.terms.emplace_back(at.beta + i, train.labels[i]);
      stationarity_rows.push_back(mb.num_rows());
      mb.add_row(e, Relation::Equal, 0.0);
    }
    for (std::size_t i = 0; i < nT; ++i) {
      mb.add_row(AffineExpr{{{at.beta + i, 1.0}, {at.lambda, -invT}}, 0.0}, Relation::LessEqual, 0.0);
    }

    // Complementary slackness.
    for (std::size_t k = 0; k < nF; ++k) {
      const std::size_t i = flip.v_f[k];
      AffineExpr slack = plus_var(margin(validation.row(i), -validation.labels[i], at.w, at.b), at.v + k);
      slack.constant = -1.0;
      mb.add_pair(var(at.v + k), AffineExpr{{{at.alpha + k, -1.0}}, invF}, h * (1.0 + rF[k] + Bb), h * invF,
                  "v/alpha-cap");
      mb.add_pair(var(at.alpha + k), slack, h * invF, h * (rF[k] + Bb), "alpha/margin");
    }
    for (std::size_t i = 0; i < nT; ++i) {
      AffineExpr slack = plus_var(margin(train.row(i), train.labels[i], at.w, at.b), at.xi + i);
      slack.constant = -1.0;
      mb.add_pair(var(at.beta + i), slack, h * Lambda * invT, h * (rT[i] + Bb), "beta/margin");
      // q side reaches Lambda/|T| only when the multiplier sits at its cap,
      // so the guard threshold is taken against the cap itself.
      mb.add_pair(var(at.xi + i), AffineExpr{{{at.lambda, invT}, {at.beta + i, -1.0}}, 0.0}, h * (1.0 + rT[i] + Bb),
                  Lambda * invT, "xi/beta-cap");
    }
    for (std::size_t j = 0; j < p; ++j) {
      mb.add_pair(var(at.mup + j), diff(at.wbar + j, at.w + j, -1.0), h * mu_cap[j], h * 2.0 * ub[j], "mu+/box");
      mb.add_pair(var(at.mum + j), diff(at.wbar + j, at.w + j, 1.0), h * mu_cap[j], h * 2.0 * ub[j], "mu-/box");
    }
    mb.add_pair(var(at.lambda), loss_room, Lambda, h * cap_total * invT, "lambda/loss-room");
    return mb;
  };

  double certificate_gap = 0.0;
  const auto inner_certificate = [&](const std::vector<double>& x) {
    // Flipped inner LP at the returned (w_bar, xi_hat), solved directly.
    double budget = 0.0;
    for (std::size_t i = 0; i < nT; ++i) budget += (1.0 + epsilon) * x[at.xihat + i];
    const std::size_t nvar = p + 1 + nF + nT;
    LinearProgram lp;
    lp.objective.assign(nvar, 0.0);
    lp.bounds.resize(nvar, {0.0, kInfinity});
    for (std::size_t j = 0; j < p; ++j) {
      const double cap = std::max(0.0, x[at.wbar + j]);
      lp.bounds[j] = {-cap, cap};
    }
    lp.bounds[p] = {-settings.intercept_bound, settings.intercept_bound};
    for (std::size_t k = 0; k < nF; ++k) lp.objective[p + 1 + k] = invF;
    const auto hinge_row = [&](std::span<const double> xr, double y, std::size_t slack) {
      Constraint row;
      row.coefficients.assign(nvar, 0.0);
      for (std::size_t j = 0; j < p; ++j) row.coefficients[j] = y * xr[j];
      row.coefficients[p] = -y;
      row.coefficients[slack] = 1.0;
      row.relation = Relation::GreaterEqual;
      row.rhs = 1.0;
      lp.rows.push_back(std::move(row));
    };
    for (std::size_t k = 0; k < nF; ++k) {
      const std::size_t i = flip.v_f[k];
      hinge_row(validation.row(i), -validation.labels[i], p + 1 + k);
    }
    for (std::size_t i = 0; i < nT; ++i) hinge_row(train.row(i), train.labels[i], p + 1 + nF + i);
    Constraint room;
    room.coefficients.assign(nvar, 0.0);
    for (std::size_t i = 0; i < nT; ++i) room.coefficients[p + 1 + nF + i] = 1.0;
    room.relation = Relation::LessEqual;
    room.rhs = budget + 1e-9 * (1.0 + budget);
    lp.rows.push_back(std::move(room));
    const LpSolution sol = solve_lp(lp);
    double mip_value = 0.0;
    for (std::size_t k = 0; k < nF; ++k) mip_value += invF * x[at.v + k];
    return sol.status == LpStatus::Optimal ? std::abs(sol.objective_value - mip_value) : kInfinity;
  };

  const auto extra_flag = [&](const std::vector<double>& x) {
    certificate_gap = inner_certificate(x);
    if (certificate_gap > 1e-6) return Flag::Hard;
    const bool intercept_at_cap =
        Bb < settings.intercept_bound && std::abs(x[at.b]) >= 0.95 * Bb;
    return intercept_at_cap ? Flag::Soft : Flag::None;
  };

  PessimisticSolution out;
  out.epsilon = epsilon;
  const Guarded solved = solve_guarded(make, extra_flag, starts, settings, out.stats, "pessimistic");
  const auto& x = solved.solution.primal;
  const auto slice = [&](std::size_t first, std::size_t count) {
    return std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(first),
                               x.begin() + static_cast<std::ptrdiff_t>(first + count));
  };
  out.w_bar_star = read_w_bar(x, at.wbar, bounds);
  out.replica.w = slice(at.what, p);
  out.replica.b = x[at.bhat];
  out.replica.xi = slice(at.xihat, nT);
  out.replica.w_bar = out.w_bar_star;
  out.adversarial.w = slice(at.w, p);
  out.adversarial.b = x[at.b];
  out.adversarial.xi = slice(at.xi, nT);
  out.adversarial.w_bar = out.w_bar_star;
  out.v = slice(at.v, nF);
  out.loss_multiplier = x[at.lambda];
  out.outer_objective = mean_hinge_loss(out.adversarial, validation);
  out.inner_certificate_gap = certificate_gap;

  double residual = max_pair_residual(solved.pairs, x);
  for (std::size_t r : stationarity_rows) {
    const auto& row = solved.problem.base.rows[r];
    double lhs = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) lhs += row.coefficients[j] * x[j];
    residual = std::max(residual, std::abs(lhs - row.rhs));
  }
  out.kkt_residual = residual;
  out.raw = x;
  return out;
}

WorstCaseResult evaluate_worst_case(const std::vector<double>& w_bar_star, const LabeledDataset& train,
                                    const LabeledDataset& validation, double epsilon, const FlipSets& flip,
                                    const BilevelSettings& settings) {
  check_inputs(train, validation);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::ConfigError, "epsilon must be >= 0");
  const std::size_t p = train.num_features;
  const std::size_t nT = train.size();
  const std::size_t nV = validation.size();
  const double B = settings.intercept_bound;

  WorstCaseResult out;
  const auto start = Clock::now();
  out.theta = train_inner_svm(train, w_bar_star, B).objective;
  const double budget = out.theta * (1.0 + epsilon);

  // Feasible set shared by every LP below: columns w (p), b, xi (nT).
  const std::size_t base_cols = p + 1 + nT;
  const auto feasible_set = [&](std::size_t extra) {
    LinearProgram lp;
    const std::size_t n = base_cols + extra;
    lp.objective.assign(n, 0.0);
    lp.bounds.assign(n, {0.0, kInfinity});
    for (std::size_t j = 0; j < p; ++j) lp.bounds[j] = {-w_bar_star[j], w_bar_star[j]};
    lp.bounds[p] = {-B, B};
    for (std::size_t i = 0; i < nT; ++i) {
      Constraint row;
      row.coefficients.assign(n, 0.0);
      const auto xr = train.row(i);
      const double y = train.labels[i];
      for (std::size_t j = 0; j < p; ++j) row.coefficients[j] = y * xr[j];
      row.coefficients[p] = -y;
      row.coefficients[p + 1 + i] = 1.0;
      row.relation = Relation::GreaterEqual;
      row.rhs = 1.0;
      lp.rows.push_back(std::move(row));
    }
    Constraint room;
    room.coefficients.assign(n, 0.0);
    for (std::size_t i = 0; i < nT; ++i) room.coefficients[p + 1 + i] = 1.0 / static_cast<double>(nT);
    room.relation = Relation::LessEqual;
    room.rhs = budget + 1e-9 * (1.0 + budget);
    lp.rows.push_back(std::move(room));
    return lp;
  };
  const auto model_from = [&](const std::vector<double>& x) {
    SvmModel m;
    m.w.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p));
    m.b = x[p];
    m.xi.assign(x.begin() + static_cast<std::ptrdiff_t>(p + 1),
                x.begin() + static_cast<std::ptrdiff_t>(p + 1 + nT));
    m.w_bar = w_bar_star;
    return m;
  };

  // Range of u_i = 1 - y_i f(x_i) over the feasible set.
  std::vector<double> lo(nV);
  std::vector<double> hi(nV);
  {
    LinearProgram lp = feasible_set(0);
    for (std::size_t i = 0; i < nV; ++i) {
      const auto xr = validation.row(i);
      const double y = validation.labels[i];
      for (int side = 0; side < 2; ++side) {
        // minimize sign * (-y f) ; u = 1 - y f
        const double sign = side == 0 ? 1.0 : -1.0;
        std::fill(lp.objective.begin(), lp.objective.end(), 0.0);
        for (std::size_t j = 0; j < p; ++j) lp.objective[j] = -sign * y * xr[j];
        lp.objective[p] = sign * y;
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::Optimal) {
          throw Error(ErrorCode::NumericalFailure, "worst-case range LP returned " + std::string(to_string(sol.status)));
        }
        const double u = 1.0 + sign * sol.objective_value;
        (side == 0 ? lo[i] : hi[i]) = u;
      }
    }
  }

  // max sum_i h_i with h_i = max(0, u_i): binaries only where u_i changes sign.
  {
    std::vector<std::size_t> mixed;
    for (std::size_t i = 0; i < nV; ++i) {
      if (lo[i] < 0.0 && hi[i] > 0.0) mixed.push_back(i);
    }
    const std::size_t nh = mixed.size();
    MipProblem mip;
    mip.base = feasible_set(2 * nh);
    auto& lp = mip.base;
    const double invV = 1.0 / static_cast<double>(nV);
    for (std::size_t i = 0; i < nV; ++i) {
      if (lo[i] < 0.0) continue;  // u_i >= 0 throughout: h_i = u_i, or u_i <= 0: h_i = 0 handled below
      const auto xr = validation.row(i);
      const double y = validation.labels[i];
      // objective += -(1 - y f)/|V|  (constant dropped)
      for (std::size_t j = 0; j < p; ++j) lp.objective[j] += invV * y * xr[j];
      lp.objective[p] -= invV * y;
    }
    for (std::size_t k = 0; k < nh; ++k) {
      const std::size_t i = mixed[k];
      const std::size_t hcol = base_cols + k;
      const std::size_t zcol = base_cols + nh + k;
      lp.objective[hcol] = -invV;
      lp.bounds[hcol] = {0.0, hi[i]};
      lp.bounds[zcol] = {0.0, 1.0};
      mip.binaries.push_back(zcol);
      const auto xr = validation.row(i);
      const double y = validation.labels[i];
      // h <= 1 - y f + |lo| (1 - z)
      Constraint a;
      a.coefficients.assign(lp.num_variables(), 0.0);
      for (std::size_t j = 0; j < p; ++j) a.coefficients[j] = y * xr[j];
      a.coefficients[p] = -y;
      a.coefficients[hcol] = 1.0;
      a.coefficients[zcol] = -lo[i];
      a.relation = Relation::LessEqual;
      a.rhs = 1.0 - lo[i];
      lp.rows.push_back(std::move(a));
      // h <= hi z
      Constraint c;
      c.coefficients.assign(lp.num_variables(), 0.0);
      c.coefficients[hcol] = 1.0;
      c.coefficients[zcol] = -hi[i];
      c.relation = Relation::LessEqual;
      c.rhs = 0.0;
      lp.rows.push_back(std::move(c));
    }
    const MipSolution sol = solve_mip(mip, settings.mip);
    if (sol.status != MipStatus::Optimal) throw Error(ErrorCode::InfeasibleModel, "worst-case MIP is infeasible");
    out.model = model_from(sol.primal);
    out.value = mean_hinge_loss(out.model, validation);
    out.stats.binaries = nh;
    out.stats.rows = lp.num_rows();
    out.stats.columns = lp.num_variables();
    out.stats.node_count = sol.node_count;
    out.stats.lp_iterations = sol.lp_iterations;
  }

  // Flipped-label estimate: minimize the flipped hinge over V_f.
  if (!flip.v_f.empty()) {
    const std::size_t nF = flip.v_f.size();
    LinearProgram lp = feasible_set(nF);
    for (std::size_t k = 0; k < nF; ++k) {
      const std::size_t i = flip.v_f[k];
      const std::size_t col = base_cols + k;
      lp.objective[col] = 1.0 / static_cast<double>(nF);
      Constraint row;
      row.coefficients.assign(lp.num_variables(), 0.0);
      const auto xr = validation.row(i);
      const double y = -validation.labels[i];
      for (std::size_t j = 0; j < p; ++j) row.coefficients[j] = y * xr[j];
      row.coefficients[p] = -y;
      row.coefficients[col] = 1.0;
      row.relation = Relation::GreaterEqual;
      row.rhs = 1.0;
      lp.rows.push_back(std::move(row));
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal) throw Error(ErrorCode::NumericalFailure, "flipped evaluation LP failed");
    out.flip_model = model_from(sol.primal);
    out.flip_estimate = mean_hinge_loss(out.flip_model, validation);
  } else {
    out.flip_model = out.model;
    out.flip_estimate = out.value;
  }
  out.stats.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

SvmModel TuneResult::pessimistic_model(PessimisticTestModel which) const {
  if (pessimistic_fallback) return optimistic.model;
  return which == PessimisticTestModel::Replica ? pessimistic.replica : pessimistic.adversarial;
}

TuneResult tune(const LabeledDataset& train, const LabeledDataset& validation, const HyperBounds& bounds,
                double epsilon, FlipMode flip_mode, const BilevelSettings& settings) {
  TuneResult out;
  out.epsilon = epsilon;
  out.flip_mode = flip_mode;
  out.optimistic = solve_optimistic(train, validation, bounds, settings);
  out.flip = compute_flip_sets(out.optimistic.model, validation, flip_mode, train.size());
  if (out.flip.v_f.empty()) {
    out.pessimistic_fallback = true;
    out.pessimistic.w_bar_star = out.optimistic.w_bar;
    out.pessimistic.replica = out.optimistic.model;
    out.pessimistic.adversarial = out.optimistic.model;
    out.pessimistic.outer_objective = out.optimistic.outer_objective;
    out.pessimistic.epsilon = epsilon;
  } else {
    out.pessimistic = solve_pessimistic(train, validation, bounds, epsilon, out.flip, settings, {out.optimistic.w_bar});
  }
  out.worst_case = evaluate_worst_case(out.optimistic.w_bar, train, validation, epsilon, out.flip, settings);
  return out;
}

std::string model_to_json(const SvmModel& model, double objective, double epsilon, FlipMode flip_mode,
                          std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["w"] = model.w;
  j["b"] = model.b;
  j["w_bar"] = model.w_bar;
  j["objective"] = objective;
  j["epsilon"] = epsilon;
  j["flip_mode"] = std::string(to_string(flip_mode));
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace bltune
