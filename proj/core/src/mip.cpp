#include "bltune/mip.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <memory>
#include <queue>
#include <sstream>

#include "bltune/error.hpp"
#include "dense_simplex.hpp"
#include "text_format.hpp"

namespace bltune {

double AffineExpr::evaluate(const std::vector<double>& x) const {
  double value = constant;
  for (const auto& [index, coef] : terms) value += coef * x.at(index);
  return value;
}

std::string_view to_string(MipStatus status) {
  return status == MipStatus::Optimal ? "Optimal" : "Infeasible";
}

void MipProblem::validate() const {
  base.validate();
  std::vector<char> seen(base.num_variables(), 0);
  for (std::size_t j : binaries) {
    if (j >= base.num_variables()) {
      throw Error(ErrorCode::MalformedProblem, "binary index " + std::to_string(j) + " out of range");
    }
    if (seen[j]) throw Error(ErrorCode::MalformedProblem, "binary index " + std::to_string(j) + " repeated");
    seen[j] = 1;
    if (base.bounds[j].lower != 0.0 || base.bounds[j].upper != 1.0) {
      throw Error(ErrorCode::MalformedProblem, "binary " + std::to_string(j) + " must have bounds [0, 1]");
    }
  }
  if (pairs.size() != pair_binaries.size()) {
    throw Error(ErrorCode::MalformedProblem, "every complementarity pair needs exactly one binary");
  }
  for (std::size_t z : pair_binaries) {
    if (z >= base.num_variables() || !seen[z]) {
      throw Error(ErrorCode::MalformedProblem, "pair binary " + std::to_string(z) + " is not a binary");
    }
  }
}

namespace {

std::vector<double> dense(const AffineExpr& expr, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const auto& [index, coef] : expr.terms) {
    if (index >= n) throw Error(ErrorCode::MalformedProblem, "expression index out of range");
    out[index] += coef;
  }
  return out;
}

bool nonnegative_by_bounds(const std::vector<double>& coef, double constant, const LinearProgram& lp) {
  double lowest = constant;
  for (std::size_t j = 0; j < coef.size(); ++j) {
    if (coef[j] > 0.0) {
      lowest += coef[j] * lp.bounds[j].lower;
    } else if (coef[j] < 0.0) {
      lowest += coef[j] * lp.bounds[j].upper;
    }
  }
  return lowest >= -1e-12;
}

/// Looks for a row k * (expr) >= 0, written as k * terms >= -k * constant.
bool nonnegative_by_row(const std::vector<double>& coef, double constant, const LinearProgram& lp) {
  std::size_t pivot = coef.size();
  for (std::size_t j = 0; j < coef.size(); ++j) {
    if (coef[j] != 0.0) {
      pivot = j;
      break;
    }
  }
  if (pivot == coef.size()) return constant >= 0.0;
  for (const auto& row : lp.rows) {
    const double a = row.coefficients[pivot];
    if (a == 0.0) continue;
    const double k = a / coef[pivot];
    double sign;
    if (row.relation == Relation::GreaterEqual) {
      sign = 1.0;
    } else if (row.relation == Relation::LessEqual) {
      sign = -1.0;
    } else {
      sign = k > 0.0 ? 1.0 : -1.0;
    }
    if (sign * k <= 0.0) continue;
    bool match = true;
    for (std::size_t j = 0; j < coef.size() && match; ++j) {
      match = std::abs(row.coefficients[j] - k * coef[j]) <= 1e-12 * (1.0 + std::abs(row.coefficients[j]));
    }
    if (!match) continue;
    // sign * k * (terms + constant) >= 0  <=>  sign * row >= -sign * k * constant
    if (sign * row.rhs >= -sign * k * constant - 1e-12 * (1.0 + std::abs(row.rhs))) return true;
  }
  return false;
}

void require_nonnegative(const AffineExpr& expr, const LinearProgram& lp, const std::string& which,
                         const std::string& label) {
  if (provably_nonnegative(expr, lp)) return;
  throw Error(ErrorCode::NonnegativityMissing,
              "side " + which + " of pair '" + label + "' is not constrained nonnegative");
}

}  // namespace

bool provably_nonnegative(const AffineExpr& expr, const LinearProgram& lp) {
  const auto coef = dense(expr, lp.num_variables());
  return nonnegative_by_bounds(coef, expr.constant, lp) || nonnegative_by_row(coef, expr.constant, lp);
}

std::size_t add_complementarity(MipProblem& problem, const ComplementarityPair& pair) {
  if (!(pair.big_m > 0.0) || !std::isfinite(pair.big_m) || pair.big_m_q < 0.0 || !std::isfinite(pair.big_m_q)) {
    throw Error(ErrorCode::InvalidBigM, "big-M must be positive and finite for pair '" + pair.label + "'");
  }
  auto& lp = problem.base;
  require_nonnegative(pair.p, lp, "p", pair.label);
  require_nonnegative(pair.q, lp, "q", pair.label);

  const std::size_t n = lp.num_variables();
  const std::size_t z = n;
  lp.objective.push_back(0.0);
  lp.bounds.push_back({0.0, 1.0});
  for (auto& row : lp.rows) row.coefficients.push_back(0.0);

  Constraint p_row;
  p_row.coefficients = dense(pair.p, n + 1);
  p_row.coefficients[z] = -pair.m_p();
  p_row.relation = Relation::LessEqual;
  p_row.rhs = -pair.p.constant;

  Constraint q_row;
  q_row.coefficients = dense(pair.q, n + 1);
  q_row.coefficients[z] = pair.m_q();
  q_row.relation = Relation::LessEqual;
  q_row.rhs = pair.m_q() - pair.q.constant;

  lp.rows.push_back(std::move(p_row));
  lp.rows.push_back(std::move(q_row));
  problem.binaries.push_back(z);
  problem.pairs.push_back(pair);
  problem.pair_binaries.push_back(z);
  return z;
}

MipProblem linearize_complementarity(const MipProblem& problem, const ComplementarityPair& pair) {
  MipProblem out = problem;
  add_complementarity(out, pair);
  return out;
}

namespace {

using detail::DenseSimplex;
using detail::SimplexResult;

struct Node {
  std::size_t id = 0;
  std::size_t depth = 0;
  double bound = 0.0;
  std::vector<double> primal;
  std::shared_ptr<DenseSimplex::Basis> basis;
};

/// Best bound first. Bounds equal up to 1e-9 count as ties, which go to the
/// deeper node and then to the newer one, so plateaus are searched depth
/// first instead of level by level.
struct NodeOrder {
  static double bucket(double bound) { return std::floor(bound * 1e9); }
  bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
    const double ka = bucket(a->bound);
    const double kb = bucket(b->bound);
    if (ka != kb) return ka > kb;
    if (a->depth != b->depth) return a->depth < b->depth;
    return a->id < b->id;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const MipProblem& problem, const MipOptions& options,
                 const std::vector<std::vector<double>>& starts)
      : problem_(problem),
        options_(options),
        starts_(starts),
        root_(problem.base, settings()),
        paired_(problem.base.num_variables(), 0) {
    for (std::size_t z : problem.pair_binaries) paired_[z] = 1;
  }

  MipSolution run();

 private:
  static detail::SimplexSettings settings() { return {}; }

  std::size_t most_fractional(const std::vector<double>& x, bool skip_paired) const;
  std::size_t branching_variable(const std::vector<double>& x) const;
  bool settle(const DenseSimplex& engine, const std::vector<double>& x, double bound);
  void consider_integral(DenseSimplex engine, const std::vector<double>& x);
  DenseSimplex engine_for(const Node& node);
  void remember(std::size_t id, const DenseSimplex& engine);
  void count_node();

  const MipProblem& problem_;
  MipOptions options_;
  const std::vector<std::vector<double>>& starts_;
  DenseSimplex root_;
  std::list<std::pair<std::size_t, DenseSimplex>> cache_;
  MipSolution best_;
  std::vector<char> paired_;
  bool have_incumbent_ = false;
  std::size_t next_id_ = 0;
};

constexpr double kPairSatisfied = 1e-9;

void BranchAndBound::count_node() {
  ++best_.node_count;
  if (best_.node_count > options_.node_limit) {
    throw Error(ErrorCode::NodeLimitExceeded, "branch-and-bound exceeded " + std::to_string(options_.node_limit) +
                                                  " nodes");
  }
}

std::size_t BranchAndBound::most_fractional(const std::vector<double>& x, bool skip_paired) const {
  const std::size_t none = problem_.base.num_variables();
  std::size_t chosen = none;
  double best = 0.0;
  for (std::size_t j : problem_.binaries) {
    if (skip_paired && paired_[j]) continue;
    const double frac = std::min(x[j] - std::floor(x[j]), std::ceil(x[j]) - x[j]);
    if (frac <= options_.integrality_tolerance) continue;
    if (chosen == none || frac > best || (frac == best && j < chosen)) {
      best = frac;
      chosen = j;
    }
  }
  return chosen;
}

/// Plain binaries go by fractionality first. Pair binaries go by the
/// largest scaled violation min(p / M_p, q / M_q); a fractional pair binary
/// whose pair already holds at x is not a reason to branch.
std::size_t BranchAndBound::branching_variable(const std::vector<double>& x) const {
  const std::size_t none = problem_.base.num_variables();
  const std::size_t plain = most_fractional(x, true);
  if (plain != none) return plain;
  std::size_t chosen = none;
  double best = 0.0;
  for (std::size_t k = 0; k < problem_.pairs.size(); ++k) {
    const std::size_t z = problem_.pair_binaries[k];
    if (std::min(x[z] - std::floor(x[z]), std::ceil(x[z]) - x[z]) <= options_.integrality_tolerance) continue;
    const auto& pair = problem_.pairs[k];
    const double p = pair.p.evaluate(x);
    const double q = pair.q.evaluate(x);
    if (std::min(p, q) <= kPairSatisfied) continue;
    const double violation = std::min(p / pair.m_p(), q / pair.m_q());
    if (chosen == none || violation > best || (violation == best && z < chosen)) {
      best = violation;
      chosen = z;
    }
  }
  return chosen;
}

/// x has no branching variable: set each fractional pair binary to the side
/// that is nonzero and re-solve. True when that closes the node.
bool BranchAndBound::settle(const DenseSimplex& engine, const std::vector<double>& x, double bound) {
  std::vector<double> target = x;
  for (std::size_t k = 0; k < problem_.pairs.size(); ++k) {
    const std::size_t z = problem_.pair_binaries[k];
    const auto& pair = problem_.pairs[k];
    target[z] = pair.p.evaluate(x) / pair.m_p() > pair.q.evaluate(x) / pair.m_q() ? 1.0 : 0.0;
  }
  consider_integral(engine, target);
  return have_incumbent_ && best_.objective_value <= bound + 1e-9 * (1.0 + std::abs(bound));
}

void BranchAndBound::consider_integral(DenseSimplex engine, const std::vector<double>& x) {
  // Fix every binary to its rounded value and re-solve so the incumbent is
  // exactly integral.
  for (std::size_t j : problem_.binaries) {
    const double v = std::round(x[j]);
    engine.set_structural_bounds(j, v, v);
  }
  const std::size_t before = engine.iterations();
  const SimplexResult result = engine.reoptimize();
  best_.lp_iterations += engine.iterations() - std::min(before, engine.iterations());
  if (result != SimplexResult::Optimal) return;
  const double value = engine.objective();
  if (have_incumbent_ && value >= best_.objective_value) return;
  have_incumbent_ = true;
  best_.status = MipStatus::Optimal;
  best_.objective_value = value;
  best_.primal = engine.primal();
  for (std::size_t j : problem_.binaries) best_.primal[j] = std::round(best_.primal[j]);
  best_.incumbent_history.push_back({best_.node_count, value});
}

DenseSimplex BranchAndBound::engine_for(const Node& node) {
  for (auto it = cache_.begin(); it != cache_.end(); ++it) {
    if (it->first == node.id) {
      DenseSimplex engine = std::move(it->second);
      cache_.erase(it);
      return engine;
    }
  }
  DenseSimplex engine = root_;
  if (!engine.restore(*node.basis)) {
    for (std::size_t j = 0; j < node.basis->lower.size(); ++j) {
      engine.set_structural_bounds(j, node.basis->lower[j], node.basis->upper[j]);
    }
    engine.solve();
  }
  return engine;
}

void BranchAndBound::remember(std::size_t id, const DenseSimplex& engine) {
  if (options_.engine_cache == 0) return;
  cache_.emplace_front(id, engine);
  while (cache_.size() > options_.engine_cache) cache_.pop_back();
}

MipSolution BranchAndBound::run() {
  count_node();
  const SimplexResult root_result = root_.solve();
  best_.lp_iterations += root_.iterations();
  if (root_result == SimplexResult::Infeasible) return best_;
  if (root_result == SimplexResult::Unbounded) {
    MipProblem feasibility = problem_;
    std::fill(feasibility.base.objective.begin(), feasibility.base.objective.end(), 0.0);
    MipSolution probe = solve_mip(feasibility, options_);
    if (probe.status == MipStatus::Optimal) {
      throw Error(ErrorCode::Unbounded, "relaxation is unbounded and an integral point is feasible");
    }
    probe.node_count += best_.node_count;
    return probe;
  }
  if (root_result != SimplexResult::Optimal) {
    throw Error(ErrorCode::NumericalFailure, "root relaxation failed");
  }
  best_.root_bound = root_.objective();
  for (const auto& start : starts_) {
    if (start.size() != problem_.base.num_variables()) {
      throw Error(ErrorCode::DimensionMismatch, "start point width differs from the problem");
    }
    consider_integral(root_, start);
  }

  const auto prune_gap = [&](double bound) {
    return have_incumbent_ && bound >= best_.objective_value - 1e-9 * (1.0 + std::abs(best_.objective_value));
  };

  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, NodeOrder> open;
  {
    auto root = std::make_shared<Node>();
    root->id = next_id_++;
    root->bound = best_.root_bound;
    root->primal = root_.primal();
    root->basis = std::make_shared<DenseSimplex::Basis>(root_.basis());
    const std::size_t none = problem_.base.num_variables();
    if (most_fractional(root->primal, false) == none) {
      consider_integral(root_, root->primal);
    } else if (branching_variable(root->primal) != none || !settle(root_, root->primal, root->bound)) {
      remember(root->id, root_);
      open.push(root);
    }
  }

  while (!open.empty()) {
    auto node = open.top();
    open.pop();
    if (prune_gap(node->bound)) continue;
    std::size_t j = branching_variable(node->primal);
    if (j == problem_.base.num_variables()) j = most_fractional(node->primal, false);
    DenseSimplex parent = engine_for(*node);

    for (int side = 0; side < 2; ++side) {
      const double value = side == 0 ? 0.0 : 1.0;
      DenseSimplex child(side == 0 ? DenseSimplex(parent) : std::move(parent));
      child.set_structural_bounds(j, value, value);
      count_node();
      const std::size_t before = child.iterations();
      const SimplexResult result = child.reoptimize();
      best_.lp_iterations += child.iterations() - std::min(before, child.iterations());
      if (result != SimplexResult::Optimal) continue;
      const double bound = child.objective();
      if (prune_gap(bound)) continue;
      std::vector<double> x = child.primal();
      if (most_fractional(x, false) == problem_.base.num_variables()) {
        consider_integral(child, x);
        continue;
      }
      if (branching_variable(x) == problem_.base.num_variables() && settle(child, x, bound)) continue;
      auto next = std::make_shared<Node>();
      next->id = next_id_++;
      next->depth = node->depth + 1;
      next->bound = bound;
      next->primal = std::move(x);
      next->basis = std::make_shared<DenseSimplex::Basis>(child.basis());
      remember(next->id, child);
      open.push(next);
    }
  }
  return best_;
}

}  // namespace

MipSolution solve_mip(const MipProblem& problem, const MipOptions& options) { return solve_mip(problem, options, {}); }

MipSolution solve_mip(const MipProblem& problem, const MipOptions& options,
                      const std::vector<std::vector<double>>& starts) {
  problem.validate();
  BranchAndBound search(problem, options, starts);
  return search.run();
}

BigMReport validate_big_m(const MipProblem& problem, const MipSolution& solution,
                          const std::vector<ComplementarityPair>& pairs) {
  (void)problem;
  BigMReport report;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pair = pairs[k];
    BigMEntry entry;
    entry.pair = k;
    entry.p_value = pair.p.evaluate(solution.primal);
    entry.q_value = pair.q.evaluate(solution.primal);
    entry.flagged = entry.p_value > 0.95 * pair.m_p() || entry.q_value > 0.95 * pair.m_q();
    report.any_flagged = report.any_flagged || entry.flagged;
    report.max_complementarity_residual =
        std::max(report.max_complementarity_residual, std::min(entry.p_value, entry.q_value));
    report.entries.push_back(entry);
  }
  return report;
}

std::string dump_mip(const MipProblem& problem) {
  std::string out = dump_lp(problem.base);
  for (std::size_t j : problem.binaries) out += "binary " + std::to_string(j) + "\n";
  return out;
}

MipProblem parse_mip_dump(std::string_view text) {
  MipProblem problem;
  problem.base = parse_lp_dump(text);
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto tokens = detail::split_whitespace(line);
    if (tokens.size() == 2 && tokens[0] == "binary") {
      double index = 0.0;
      if (!detail::parse_number(tokens[1], index) || index < 0.0) {
        throw Error(ErrorCode::MalformedProblem, "bad binary line '" + line + "'");
      }
      problem.binaries.push_back(static_cast<std::size_t>(index));
    }
  }
  problem.validate();
  return problem;
}

}  // namespace bltune
