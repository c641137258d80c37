#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bltune/lp.hpp"

namespace bltune {

/// Sparse affine expression sum_k coef_k * x[index_k] + constant.
struct AffineExpr {
  std::vector<std::pair<std::size_t, double>> terms;
  double constant = 0.0;

  static AffineExpr variable(std::size_t index, double coefficient = 1.0) {
    return AffineExpr{{{index, coefficient}}, 0.0};
  }
  double evaluate(const std::vector<double>& x) const;
};

/// p * q = 0 with p, q >= 0. big_m bounds p; big_m_q bounds q and defaults
/// to big_m when left at 0.
struct ComplementarityPair {
  AffineExpr p;
  AffineExpr q;
  double big_m = 0.0;
  double big_m_q = 0.0;
  std::string label;

  double m_p() const { return big_m; }
  double m_q() const { return big_m_q > 0.0 ? big_m_q : big_m; }
};

struct MipProblem {
  LinearProgram base;
  std::vector<std::size_t> binaries;
  /// Pairs linearized into this problem and the binary each one owns.
  /// Branch-and-bound branches on these by violation rather than
  /// fractionality.
  std::vector<ComplementarityPair> pairs;
  std::vector<std::size_t> pair_binaries;

  /// Base LP checks plus: binary indices in range, unique, bounded by [0, 1];
  /// every pair binary listed among the binaries.
  void validate() const;
};

enum class MipStatus { Optimal, Infeasible };

std::string_view to_string(MipStatus status);

struct IncumbentRecord {
  std::size_t node_count = 0;
  double objective = 0.0;
};

struct MipSolution {
  MipStatus status = MipStatus::Infeasible;
  std::vector<double> primal;
  double objective_value = 0.0;
  std::size_t node_count = 0;
  std::vector<IncumbentRecord> incumbent_history;
  double root_bound = 0.0;
  std::size_t lp_iterations = 0;
};

struct MipOptions {
  std::size_t node_limit = 1'000'000;
  double integrality_tolerance = 1e-6;
  LpTolerances tolerances;
  /// Number of node tableaus kept in memory for warm starts.
  std::size_t engine_cache = 16;
};

/// True when expr >= 0 follows from the variable bounds or from a row that
/// is a positive multiple of expr >= 0.
bool provably_nonnegative(const AffineExpr& expr, const LinearProgram& lp);

/// Appends one binary z and the rows p - M z <= 0, q + M_q z <= M_q.
/// Throws InvalidBigM for a non-positive M and NonnegativityMissing when
/// p or q is not provably nonnegative from bounds or an explicit row.
MipProblem linearize_complementarity(const MipProblem& problem, const ComplementarityPair& pair);

/// In-place variant; returns the index of the new binary.
std::size_t add_complementarity(MipProblem& problem, const ComplementarityPair& pair);

/// Best-first branch-and-bound on the binaries. Throws Unbounded when the
/// relaxation is unbounded and some integral point is feasible, and
/// NodeLimitExceeded past options.node_limit nodes.
MipSolution solve_mip(const MipProblem& problem, const MipOptions& options = {});

/// Same search, seeded with candidate points. Only the binary coordinates
/// of each start are used: they are rounded and fixed, and the remaining LP
/// is solved to give an incumbent before branching begins.
MipSolution solve_mip(const MipProblem& problem, const MipOptions& options,
                      const std::vector<std::vector<double>>& starts);

struct BigMEntry {
  std::size_t pair = 0;
  double p_value = 0.0;
  double q_value = 0.0;
  bool flagged = false;
};

struct BigMReport {
  std::vector<BigMEntry> entries;
  bool any_flagged = false;
  /// max over pairs of min(p, q); near zero when complementarity holds.
  double max_complementarity_residual = 0.0;
};

/// Flags every pair with p > 0.95 M or q > 0.95 M_q at the solution.
BigMReport validate_big_m(const MipProblem& problem, const MipSolution& solution,
                          const std::vector<ComplementarityPair>& pairs);

/// LP dump followed by one `binary i` line per binary.
std::string dump_mip(const MipProblem& problem);
MipProblem parse_mip_dump(std::string_view text);

}  // namespace bltune
