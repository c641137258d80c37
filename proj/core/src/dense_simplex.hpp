#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bltune/lp.hpp"

namespace bltune::detail {

enum class SimplexResult { Optimal, Infeasible, Unbounded, IterationLimit, Singular };

struct SimplexSettings {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  std::size_t degenerate_before_bland = 50;
  std::size_t iteration_limit = 0;  // 0: size based
  std::size_t refactor_interval = 300;
};

/// Bounded-variable dense tableau simplex.
///
/// Rows are scaled to unit infinity norm and carry one logical column each,
/// a_r x + s_r = b_r, whose bounds encode the relation (<=: s >= 0,
/// >=: s <= 0, =: s == 0). Cold solves run a two-phase primal method with
/// artificial columns on rows the starting point violates. After bound
/// changes, reoptimize() runs the dual simplex from the current basis,
/// which is what branch-and-bound uses for warm starts.
class DenseSimplex {
 public:
  enum class State : std::uint8_t { Basic, AtLower, AtUpper, Free };

  struct Basis {
    std::vector<int> basic_columns;  // length m
    std::vector<State> state;        // every column of the engine
    std::vector<double> lower;       // structural bounds at snapshot time
    std::vector<double> upper;
  };

  DenseSimplex(const LinearProgram& lp, const SimplexSettings& settings);

  SimplexResult solve();

  void set_structural_bounds(std::size_t column, double lower, double upper);
  SimplexResult reoptimize();

  /// Snapshot usable to rebuild the tableau of this engine or of a copy of
  /// it. Only valid after an optimal solve.
  bool can_snapshot() const;
  Basis basis() const;
  /// Rebuilds the tableau for `basis`. Returns false when the basis matrix is
  /// numerically singular; the caller should then cold solve.
  bool restore(const Basis& basis);

  std::vector<double> primal() const;
  std::vector<double> duals() const;
  double objective() const;
  std::size_t iterations() const { return iterations_; }
  std::size_t num_structurals() const { return n_; }
  double structural_lower(std::size_t j) const { return lower_[j]; }
  double structural_upper(std::size_t j) const { return upper_[j]; }

 private:
  double& tab(std::size_t row, std::size_t col) { return tableau_[row * ncols_ + col]; }
  double tab(std::size_t row, std::size_t col) const { return tableau_[row * ncols_ + col]; }

  void reset_nonbasic_state();
  void setup_initial_basis();
  void compute_reduced_costs();
  SimplexResult primal_loop();
  SimplexResult dual_loop();
  void pivot(std::size_t row, std::size_t col);
  bool refactor();
  void drop_artificials();
  double max_primal_infeasibility() const;
  bool repair_dual_feasibility();
  std::size_t limit() const;

  SimplexSettings settings_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::size_t ncols_ = 0;

  std::vector<double> a_;          // m x n scaled structural matrix
  std::vector<double> b_;          // scaled rhs
  std::vector<double> row_scale_;  // multiplier applied to each original row
  std::vector<double> cost_;       // phase-2 cost per column
  std::vector<double> phase_cost_;
  std::vector<std::size_t> art_row_;
  std::vector<double> art_sign_;

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> x_;
  std::vector<State> state_;
  std::vector<int> head_;
  std::vector<int> pos_;

  std::vector<double> tableau_;
  std::vector<double> d_;
  std::vector<std::size_t> work_;  // nonzero columns of the pivot row

  std::size_t iterations_ = 0;
  std::size_t call_start_ = 0;
  std::size_t since_refactor_ = 0;
  bool solved_ = false;
};

}  // namespace bltune::detail
