#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace bltune {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, GreaterEqual, Equal };

struct Constraint {
  std::vector<double> coefficients;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

struct VariableBounds {
  double lower = 0.0;
  double upper = kInfinity;
};

/// Minimize objective^T x subject to dense constraint rows and per-variable
/// bounds. Either bound may be infinite.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<Constraint> rows;
  std::vector<VariableBounds> bounds;

  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_rows() const { return rows.size(); }

  /// Throws Error(MalformedProblem) when widths disagree, a bound pair is
  /// inverted, or any coefficient/rhs is not finite.
  void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

std::string_view to_string(LpStatus status);

/// Row duals follow the convention L(x, y) = c^T x - sum_r y_r (a_r x - b_r):
/// y_r >= 0 on >= rows, y_r <= 0 on <= rows, free on equality rows.
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> primal;
  std::vector<double> duals;
  double objective_value = 0.0;
  std::size_t iterations = 0;
};

struct LpTolerances {
  double feasibility = 1e-8;  // scaled row residuals and bound violations
  double gap = 1e-7;          // relative to 1 + |objective|
};

struct LpOptions {
  LpTolerances tolerances;
  /// Consecutive degenerate pivots before pricing switches to Bland's rule.
  std::size_t degenerate_pivots_before_bland = 50;
  /// 0 selects a size-based default.
  std::size_t iteration_limit = 0;
};

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

struct CertificateReport {
  double max_primal_violation = 0.0;
  double max_dual_violation = 0.0;
  double max_complementarity_violation = 0.0;
  double duality_gap = 0.0;
  double dual_objective = 0.0;
  bool passed = false;
};

/// Recomputes feasibility, dual sign conditions, complementary slackness and
/// the duality gap from the problem data alone. Report-only.
CertificateReport check_solution(const LinearProgram& lp, const LpSolution& solution,
                                 const LpTolerances& tolerances = {});

/// Plain-text fixed layout used by fixtures:
///   min c1 c2 ...
///   a1 a2 ... <= rhs        (one line per row; relation is <=, >= or =)
///   bounds i lo hi          (one line per variable, inf/-inf allowed)
std::string dump_lp(const LinearProgram& lp);
LinearProgram parse_lp_dump(std::string_view text);

}  // namespace bltune
