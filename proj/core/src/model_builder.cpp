#include "model_builder.hpp"

#include "bltune/error.hpp"

namespace bltune::detail {

std::size_t ModelBuilder::add_variable(double lower, double upper, double cost) {
  cost_.push_back(cost);
  bounds_.push_back({lower, upper});
  return cost_.size() - 1;
}

std::size_t ModelBuilder::add_variables(std::size_t count, double lower, double upper, double cost) {
  const std::size_t first = cost_.size();
  for (std::size_t k = 0; k < count; ++k) add_variable(lower, upper, cost);
  return first;
}

void ModelBuilder::set_bounds(std::size_t j, double lower, double upper) { bounds_.at(j) = {lower, upper}; }

void ModelBuilder::add_row(const AffineExpr& expr, Relation relation, double rhs) {
  Row row{expr, relation, rhs - expr.constant};
  row.expr.constant = 0.0;
  rows_.push_back(std::move(row));
}

void ModelBuilder::add_pair(const AffineExpr& p, const AffineExpr& q, double m_p, double m_q, std::string label) {
  if (!(m_p > 0.0) || !(m_q > 0.0)) return;
  ComplementarityPair pair;
  pair.p = p;
  pair.q = q;
  pair.big_m = m_p;
  pair.big_m_q = m_q;
  pair.label = std::move(label);
  pairs_.push_back(std::move(pair));
}

MipProblem ModelBuilder::build(double m_scale) const {
  const std::size_t n = cost_.size();
  const std::size_t total = n + pairs_.size();
  MipProblem problem;
  auto& lp = problem.base;
  lp.objective = cost_;
  lp.objective.resize(total, 0.0);
  lp.bounds = bounds_;
  lp.bounds.resize(total, VariableBounds{0.0, 1.0});
  lp.rows.reserve(rows_.size() + 2 * pairs_.size());
  for (const auto& row : rows_) {
    Constraint c;
    c.coefficients.assign(total, 0.0);
    for (const auto& [j, a] : row.expr.terms) {
      if (j >= n) throw Error(ErrorCode::InvariantViolation, "model row references an unknown variable");
      c.coefficients[j] += a;
    }
    c.relation = row.relation;
    c.rhs = row.rhs;
    lp.rows.push_back(std::move(c));
  }
  for (const auto& pair : pairs_) {
    if (!provably_nonnegative(pair.p, lp) || !provably_nonnegative(pair.q, lp)) {
      throw Error(ErrorCode::NonnegativityMissing, "pair '" + pair.label + "' has a side not constrained nonnegative");
    }
  }
  // Linearize in place: columns for the binaries are already allocated, so
  // each pair only appends its two rows.
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto& pair = pairs_[k];
    const std::size_t z = n + k;
    const double mp = pair.m_p() * m_scale;
    const double mq = pair.m_q() * m_scale;
    Constraint p_row;
    p_row.coefficients.assign(total, 0.0);
    for (const auto& [j, a] : pair.p.terms) p_row.coefficients[j] += a;
    p_row.coefficients[z] = -mp;
    p_row.relation = Relation::LessEqual;
    p_row.rhs = -pair.p.constant;
    Constraint q_row;
    q_row.coefficients.assign(total, 0.0);
    for (const auto& [j, a] : pair.q.terms) q_row.coefficients[j] += a;
    q_row.coefficients[z] = mq;
    q_row.relation = Relation::LessEqual;
    q_row.rhs = mq - pair.q.constant;
    lp.rows.push_back(std::move(p_row));
    lp.rows.push_back(std::move(q_row));
    problem.binaries.push_back(z);
    ComplementarityPair scaled = pair;
    scaled.big_m = mp;
    scaled.big_m_q = mq;
    problem.pairs.push_back(std::move(scaled));
    problem.pair_binaries.push_back(z);
  }
  return problem;
}

}  // namespace bltune::detail
