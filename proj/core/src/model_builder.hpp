#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bltune/mip.hpp"

namespace bltune::detail {

/// Accumulates a MIP with sparse rows and complementarity pairs, then emits
/// the dense problem with every pair big-M linearized.
class ModelBuilder {
 public:
  std::size_t add_variable(double lower, double upper, double cost = 0.0);
  /// Returns the index of the first of `count` consecutive variables.
  std::size_t add_variables(std::size_t count, double lower, double upper, double cost = 0.0);
  void set_bounds(std::size_t j, double lower, double upper);

  /// expr (relation) rhs; expr.constant is moved to the right-hand side.
  void add_row(const AffineExpr& expr, Relation relation, double rhs);

  /// Pairs whose M is not positive are skipped: their side is fixed at zero.
  void add_pair(const AffineExpr& p, const AffineExpr& q, double m_p, double m_q, std::string label);

  std::size_t num_variables() const { return cost_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<ComplementarityPair>& pairs() const { return pairs_; }

  /// Dense problem with each pair's M multiplied by `m_scale`.
  MipProblem build(double m_scale = 1.0) const;

 private:
  struct Row {
    AffineExpr expr;
    Relation relation;
    double rhs;
  };

  std::vector<double> cost_;
  std::vector<VariableBounds> bounds_;
  std::vector<Row> rows_;
  std::vector<ComplementarityPair> pairs_;
};

}  // namespace bltune::detail
