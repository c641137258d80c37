#include "bltune/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bltune/error.hpp"
#include "dense_simplex.hpp"
#include "text_format.hpp"

namespace bltune {

void LinearProgram::validate() const {
  const std::size_t n = objective.size();
  if (bounds.size() != n) {
    throw Error(ErrorCode::MalformedProblem,
                "bounds has " + std::to_string(bounds.size()) + " entries for " + std::to_string(n) + " variables");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) throw Error(ErrorCode::MalformedProblem, "objective coefficient is not finite");
    const auto& bd = bounds[j];
    if (std::isnan(bd.lower) || std::isnan(bd.upper) || bd.lower > bd.upper || bd.lower == kInfinity ||
        bd.upper == -kInfinity) {
      throw Error(ErrorCode::MalformedProblem, "invalid bounds on variable " + std::to_string(j));
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.coefficients.size() != n) {
      throw Error(ErrorCode::MalformedProblem, "row " + std::to_string(r) + " has width " +
                                                   std::to_string(row.coefficients.size()) + ", expected " +
                                                   std::to_string(n));
    }
    if (!std::isfinite(row.rhs)) throw Error(ErrorCode::MalformedProblem, "row " + std::to_string(r) + " rhs");
    for (double v : row.coefficients) {
      if (!std::isfinite(v)) throw Error(ErrorCode::MalformedProblem, "row " + std::to_string(r) + " coefficient");
    }
  }
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "Unknown";
}

namespace {

struct Attempt {
  detail::SimplexResult result;
  LpSolution solution;
};

Attempt run(const LinearProgram& lp, const detail::SimplexSettings& settings) {
  detail::DenseSimplex engine(lp, settings);
  Attempt attempt{engine.solve(), {}};
  attempt.solution.iterations = engine.iterations();
  switch (attempt.result) {
    case detail::SimplexResult::Optimal:
      attempt.solution.status = LpStatus::Optimal;
      attempt.solution.primal = engine.primal();
      attempt.solution.duals = engine.duals();
      attempt.solution.objective_value = engine.objective();
      break;
    case detail::SimplexResult::Infeasible:
      attempt.solution.status = LpStatus::Infeasible;
      break;
    case detail::SimplexResult::Unbounded:
      attempt.solution.status = LpStatus::Unbounded;
      break;
    default:
      break;
  }
  return attempt;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  lp.validate();
  detail::SimplexSettings settings;
  settings.degenerate_before_bland = options.degenerate_pivots_before_bland;
  settings.iteration_limit = options.iteration_limit;

  Attempt attempt = run(lp, settings);
  const auto certified = [&](const Attempt& a) {
    if (a.result == detail::SimplexResult::Infeasible || a.result == detail::SimplexResult::Unbounded) return true;
    if (a.result != detail::SimplexResult::Optimal) return false;
    return check_solution(lp, a.solution, options.tolerances).passed;
  };
  if (certified(attempt)) return attempt.solution;

  // Second pass: pure Bland pricing and frequent refactorization.
  settings.degenerate_before_bland = 0;
  settings.refactor_interval = 25;
  Attempt retry = run(lp, settings);
  if (certified(retry)) return retry.solution;
  if (retry.result == detail::SimplexResult::Optimal) return retry.solution;
  if (attempt.result == detail::SimplexResult::Optimal) return attempt.solution;
  throw Error(ErrorCode::NumericalFailure, "simplex did not terminate with a usable basis");
}

CertificateReport check_solution(const LinearProgram& lp, const LpSolution& solution, const LpTolerances& tolerances) {
  CertificateReport report;
  const std::size_t n = lp.num_variables();
  const std::size_t m = lp.num_rows();
  if (solution.primal.size() != n || solution.duals.size() != m) {
    report.max_primal_violation = kInfinity;
    return report;
  }
  const auto& x = solution.primal;
  const auto& y = solution.duals;

  double primal_obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) primal_obj += lp.objective[j] * x[j];

  // Reduced costs d = c - A^T y and per-column magnitude for normalization.
  std::vector<double> d(lp.objective);
  std::vector<double> d_scale(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) d_scale[j] = 1.0 + std::abs(lp.objective[j]);
  double dual_obj = 0.0;

  for (std::size_t r = 0; r < m; ++r) {
    const auto& row = lp.rows[r];
    double activity = 0.0;
    double norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      activity += row.coefficients[j] * x[j];
      norm = std::max(norm, std::abs(row.coefficients[j]));
      const double term = row.coefficients[j] * y[r];
      d[j] -= term;
      d_scale[j] = std::max(d_scale[j], 1.0 + std::abs(term));
    }
    const double scale = norm > 0.0 ? norm : 1.0;
    const double slack = (activity - row.rhs) / scale;  // >= 0 means activity above rhs
    double violation = 0.0;
    double sign_violation = 0.0;
    switch (row.relation) {
      case Relation::LessEqual:
        violation = std::max(0.0, slack);
        sign_violation = std::max(0.0, y[r]);
        break;
      case Relation::GreaterEqual:
        violation = std::max(0.0, -slack);
        sign_violation = std::max(0.0, -y[r]);
        break;
      case Relation::Equal:
        violation = std::abs(slack);
        break;
    }
    report.max_primal_violation = std::max(report.max_primal_violation, violation);
    report.max_dual_violation = std::max(report.max_dual_violation, sign_violation * scale / (1.0 + std::abs(y[r]) * scale));
    if (row.relation != Relation::Equal) {
      const double product = std::abs(y[r] * scale) * std::abs(slack) / (1.0 + std::abs(primal_obj));
      report.max_complementarity_violation = std::max(report.max_complementarity_violation, product);
    }
    dual_obj += row.rhs * y[r];
  }

  for (std::size_t j = 0; j < n; ++j) {
    const double lo = lp.bounds[j].lower;
    const double hi = lp.bounds[j].upper;
    const double bound_violation = std::max({0.0, lo - x[j], x[j] - hi}) / (1.0 + std::abs(x[j]));
    report.max_primal_violation = std::max(report.max_primal_violation, bound_violation);

    const double dj = d[j];
    double dual_violation = 0.0;
    if (dj > 0.0) {
      if (std::isfinite(lo)) {
        dual_obj += dj * lo;
        report.max_complementarity_violation = std::max(
            report.max_complementarity_violation, dj * std::abs(x[j] - lo) / (1.0 + std::abs(primal_obj)));
      } else {
        dual_violation = dj;
      }
    } else if (dj < 0.0) {
      if (std::isfinite(hi)) {
        dual_obj += dj * hi;
        report.max_complementarity_violation = std::max(
            report.max_complementarity_violation, -dj * std::abs(hi - x[j]) / (1.0 + std::abs(primal_obj)));
      } else {
        dual_violation = -dj;
      }
    }
    report.max_dual_violation = std::max(report.max_dual_violation, dual_violation / d_scale[j]);
  }

  report.dual_objective = dual_obj;
  report.duality_gap = std::abs(primal_obj - dual_obj);
  report.passed = report.max_primal_violation <= tolerances.feasibility &&
                  report.max_dual_violation <= tolerances.feasibility &&
                  report.max_complementarity_violation <= tolerances.feasibility &&
                  report.duality_gap <= tolerances.gap * (1.0 + std::abs(primal_obj));
  return report;
}

std::string dump_lp(const LinearProgram& lp) {
  std::ostringstream out;
  out << "min";
  for (double c : lp.objective) out << ' ' << detail::format_number(c);
  out << '\n';
  for (const auto& row : lp.rows) {
    for (std::size_t j = 0; j < row.coefficients.size(); ++j) {
      if (j) out << ' ';
      out << detail::format_number(row.coefficients[j]);
    }
    switch (row.relation) {
      case Relation::LessEqual: out << " <= "; break;
      case Relation::GreaterEqual: out << " >= "; break;
      case Relation::Equal: out << " = "; break;
    }
    out << detail::format_number(row.rhs) << '\n';
  }
  for (std::size_t j = 0; j < lp.bounds.size(); ++j) {
    out << "bounds " << j << ' ' << detail::format_number(lp.bounds[j].lower) << ' '
        << detail::format_number(lp.bounds[j].upper) << '\n';
  }
  return out.str();
}

LinearProgram parse_lp_dump(std::string_view text) {
  LinearProgram lp;
  bool have_objective = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_whitespace(line);
    if (tokens.empty()) continue;
    const auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::MalformedProblem, "dump line " + std::to_string(line_no) + ": " + what);
    };
    const auto number = [&](const std::string& token) {
      double v = 0.0;
      if (!detail::parse_number(token, v)) fail("bad number '" + token + "'");
      return v;
    };
    if (tokens[0] == "min") {
      if (have_objective) fail("duplicate objective");
      for (std::size_t k = 1; k < tokens.size(); ++k) lp.objective.push_back(number(tokens[k]));
      lp.bounds.assign(lp.objective.size(), VariableBounds{});
      have_objective = true;
    } else if (!have_objective) {
      fail("expected 'min' line first");
    } else if (tokens[0] == "bounds") {
      if (tokens.size() != 4) fail("bounds needs index, lower, upper");
      const auto index = static_cast<std::size_t>(number(tokens[1]));
      if (index >= lp.bounds.size()) fail("bounds index out of range");
      lp.bounds[index] = {number(tokens[2]), number(tokens[3])};
    } else if (tokens[0] == "binary") {
      // Handled by the MIP parser; ignored here.
      continue;
    } else {
      if (tokens.size() < 2) fail("row needs a relation and rhs");
      Constraint row;
      const std::string& rel = tokens[tokens.size() - 2];
      if (rel == "<=") {
        row.relation = Relation::LessEqual;
      } else if (rel == ">=") {
        row.relation = Relation::GreaterEqual;
      } else if (rel == "=") {
        row.relation = Relation::Equal;
      } else {
        fail("unknown relation '" + rel + "'");
      }
      row.rhs = number(tokens.back());
      for (std::size_t k = 0; k + 2 < tokens.size(); ++k) row.coefficients.push_back(number(tokens[k]));
      lp.rows.push_back(std::move(row));
    }
  }
  if (!have_objective) throw Error(ErrorCode::MalformedProblem, "dump has no 'min' line");
  lp.validate();
  return lp;
}

}  // namespace bltune
