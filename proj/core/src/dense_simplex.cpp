#include "dense_simplex.hpp"

#include <algorithm>
#include <cmath>

#include "bltune/error.hpp"

namespace bltune::detail {

namespace {

constexpr double kTie = 1e-12;

}  // namespace

DenseSimplex::DenseSimplex(const LinearProgram& lp, const SimplexSettings& settings) : settings_(settings) {
  lp.validate();
  m_ = lp.num_rows();
  n_ = lp.num_variables();

  a_.assign(m_ * n_, 0.0);
  b_.assign(m_, 0.0);
  row_scale_.assign(m_, 1.0);
  lower_.assign(n_ + m_, 0.0);
  upper_.assign(n_ + m_, 0.0);
  cost_.assign(n_ + m_, 0.0);

  for (std::size_t j = 0; j < n_; ++j) {
    lower_[j] = lp.bounds[j].lower;
    upper_[j] = lp.bounds[j].upper;
    cost_[j] = lp.objective[j];
  }
  for (std::size_t r = 0; r < m_; ++r) {
    const auto& row = lp.rows[r];
    double largest = 0.0;
    for (double v : row.coefficients) largest = std::max(largest, std::abs(v));
    const double scale = largest > 0.0 ? 1.0 / largest : 1.0;
    row_scale_[r] = scale;
    for (std::size_t j = 0; j < n_; ++j) a_[r * n_ + j] = row.coefficients[j] * scale;
    b_[r] = row.rhs * scale;
    switch (row.relation) {
      case Relation::LessEqual:
        lower_[n_ + r] = 0.0;
        upper_[n_ + r] = kInfinity;
        break;
      case Relation::GreaterEqual:
        lower_[n_ + r] = -kInfinity;
        upper_[n_ + r] = 0.0;
        break;
      case Relation::Equal:
        lower_[n_ + r] = 0.0;
        upper_[n_ + r] = 0.0;
        break;
    }
  }
  ncols_ = n_ + m_;
}

std::size_t DenseSimplex::limit() const {
  if (settings_.iteration_limit != 0) return settings_.iteration_limit;
  return 200 * (m_ + ncols_) + 2000;
}

void DenseSimplex::reset_nonbasic_state() {
  for (std::size_t j = 0; j < n_; ++j) {
    if (std::isfinite(lower_[j])) {
      state_[j] = State::AtLower;
      x_[j] = lower_[j];
    } else if (std::isfinite(upper_[j])) {
      state_[j] = State::AtUpper;
      x_[j] = upper_[j];
    } else {
      state_[j] = State::Free;
      x_[j] = 0.0;
    }
  }
}

void DenseSimplex::setup_initial_basis() {
  // Drop any artificial columns left from an earlier solve.
  ncols_ = n_ + m_;
  lower_.resize(ncols_);
  upper_.resize(ncols_);
  cost_.resize(ncols_);
  art_row_.clear();
  art_sign_.clear();
  x_.assign(ncols_, 0.0);
  state_.assign(ncols_, State::AtLower);
  head_.assign(m_, -1);

  reset_nonbasic_state();

  std::vector<double> logical(m_);
  for (std::size_t r = 0; r < m_; ++r) {
    double activity = 0.0;
    for (std::size_t j = 0; j < n_; ++j) activity += a_[r * n_ + j] * x_[j];
    logical[r] = b_[r] - activity;
  }

  for (std::size_t r = 0; r < m_; ++r) {
    const std::size_t col = n_ + r;
    const double value = logical[r];
    if (value >= lower_[col] - settings_.primal_tol && value <= upper_[col] + settings_.primal_tol) {
      head_[r] = static_cast<int>(col);
      x_[col] = value;
      state_[col] = State::Basic;
      continue;
    }
    const double bound = value < lower_[col] ? lower_[col] : upper_[col];
    x_[col] = bound;
    state_[col] = bound == lower_[col] ? State::AtLower : State::AtUpper;
    art_row_.push_back(r);
    art_sign_.push_back(value - bound > 0.0 ? 1.0 : -1.0);
  }

  const std::size_t k = art_row_.size();
  ncols_ = n_ + m_ + k;
  lower_.resize(ncols_, 0.0);
  upper_.resize(ncols_, kInfinity);
  cost_.resize(ncols_, 0.0);
  x_.resize(ncols_, 0.0);
  state_.resize(ncols_, State::Basic);
  pos_.assign(ncols_, -1);

  tableau_.assign(m_ * ncols_, 0.0);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t j = 0; j < n_; ++j) tab(r, j) = a_[r * n_ + j];
    tab(r, n_ + r) = 1.0;
  }
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t r = art_row_[a];
    const std::size_t col = n_ + m_ + a;
    tab(r, col) = art_sign_[a];
    head_[r] = static_cast<int>(col);
    x_[col] = std::abs(logical[r] - x_[n_ + r]);
    state_[col] = State::Basic;
    // Make the basic coefficient +1.
    if (art_sign_[a] < 0.0) {
      for (std::size_t c = 0; c < ncols_; ++c) tab(r, c) = -tab(r, c);
    }
  }
  for (std::size_t r = 0; r < m_; ++r) pos_[static_cast<std::size_t>(head_[r])] = static_cast<int>(r);
  since_refactor_ = 0;
}

void DenseSimplex::compute_reduced_costs() {
  d_.assign(phase_cost_.begin(), phase_cost_.end());
  for (std::size_t r = 0; r < m_; ++r) {
    const double cb = phase_cost_[static_cast<std::size_t>(head_[r])];
    if (cb == 0.0) continue;
    const double* row = &tableau_[r * ncols_];
    for (std::size_t c = 0; c < ncols_; ++c) d_[c] -= cb * row[c];
  }
  for (std::size_t r = 0; r < m_; ++r) d_[static_cast<std::size_t>(head_[r])] = 0.0;
}

void DenseSimplex::pivot(std::size_t row, std::size_t col) {
  double* pr = &tableau_[row * ncols_];
  const double inv = 1.0 / pr[col];
  work_.clear();
  for (std::size_t c = 0; c < ncols_; ++c) {
    if (pr[c] != 0.0) {
      pr[c] *= inv;
      work_.push_back(c);
    }
  }
  pr[col] = 1.0;
  for (std::size_t i = 0; i < m_; ++i) {
    if (i == row) continue;
    double* pi = &tableau_[i * ncols_];
    const double f = pi[col];
    if (f == 0.0) continue;
    for (std::size_t c : work_) pi[c] -= f * pr[c];
    pi[col] = 0.0;
  }
  const double fd = d_[col];
  if (fd != 0.0) {
    for (std::size_t c : work_) d_[c] -= fd * pr[c];
  }
  d_[col] = 0.0;

  const auto leaving = static_cast<std::size_t>(head_[row]);
  pos_[leaving] = -1;
  head_[row] = static_cast<int>(col);
  pos_[col] = static_cast<int>(row);
  state_[col] = State::Basic;
  ++since_refactor_;
}

double DenseSimplex::max_primal_infeasibility() const {
  // Residual of the scaled equality system A x + s + sigma * art = b.
  double worst = 0.0;
  for (std::size_t r = 0; r < m_; ++r) {
    double lhs = x_[n_ + r];
    for (std::size_t j = 0; j < n_; ++j) lhs += a_[r * n_ + j] * x_[j];
    worst = std::max(worst, std::abs(lhs - b_[r]));
  }
  for (std::size_t a = 0; a < art_row_.size(); ++a) {
    // Artificial columns only survive phase 1 while basic at ~0.
    worst = std::max(worst, std::abs(x_[n_ + m_ + a]));
  }
  return worst;
}

bool DenseSimplex::refactor() {
  std::vector<double> w(m_ * ncols_, 0.0);
  std::vector<double> rhs(b_);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t j = 0; j < n_; ++j) w[r * ncols_ + j] = a_[r * n_ + j];
    w[r * ncols_ + n_ + r] = 1.0;
  }
  for (std::size_t a = 0; a < art_row_.size(); ++a) {
    w[art_row_[a] * ncols_ + n_ + m_ + a] = art_sign_[a];
  }

  std::vector<char> assigned(m_, 0);
  std::vector<int> new_head(m_, -1);
  std::vector<std::size_t> nz;
  // Logical columns first: they are unit vectors, so their eliminations are cheap.
  std::vector<int> order(head_.begin(), head_.end());
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs_col) {
    const bool l = static_cast<std::size_t>(lhs) >= n_;
    const bool r = static_cast<std::size_t>(rhs_col) >= n_;
    return l > r;
  });
  for (int colv : order) {
    const auto col = static_cast<std::size_t>(colv);
    std::size_t best_row = m_;
    double best = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (assigned[r]) continue;
      const double v = std::abs(w[r * ncols_ + col]);
      if (v > best) {
        best = v;
        best_row = r;
      }
    }
    if (best_row == m_ || best < 1e-11) return false;
    double* pr = &w[best_row * ncols_];
    const double inv = 1.0 / pr[col];
    nz.clear();
    for (std::size_t c = 0; c < ncols_; ++c) {
      if (pr[c] != 0.0) {
        pr[c] *= inv;
        nz.push_back(c);
      }
    }
    rhs[best_row] *= inv;
    pr[col] = 1.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == best_row) continue;
      double* pi = &w[r * ncols_];
      const double f = pi[col];
      if (f == 0.0) continue;
      for (std::size_t c : nz) pi[c] -= f * pr[c];
      pi[col] = 0.0;
      rhs[r] -= f * rhs[best_row];
    }
    assigned[best_row] = 1;
    new_head[best_row] = colv;
  }

  tableau_.swap(w);
  head_ = new_head;
  std::fill(pos_.begin(), pos_.end(), -1);
  for (std::size_t r = 0; r < m_; ++r) pos_[static_cast<std::size_t>(head_[r])] = static_cast<int>(r);

  for (std::size_t r = 0; r < m_; ++r) {
    double value = rhs[r];
    const double* row = &tableau_[r * ncols_];
    for (std::size_t c = 0; c < ncols_; ++c) {
      if (pos_[c] >= 0 || row[c] == 0.0) continue;
      value -= row[c] * x_[c];
    }
    x_[static_cast<std::size_t>(head_[r])] = value;
  }
  compute_reduced_costs();
  since_refactor_ = 0;
  return true;
}

SimplexResult DenseSimplex::primal_loop() {
  std::size_t degenerate = 0;
  bool fresh = since_refactor_ == 0;
  for (;;) {
    if (iterations_ - call_start_ >= limit()) return SimplexResult::IterationLimit;
    if (since_refactor_ >= settings_.refactor_interval) {
      if (!refactor()) return SimplexResult::Singular;
      fresh = true;
    }
    const bool bland = degenerate >= settings_.degenerate_before_bland;

    std::size_t q = ncols_;
    int direction = 0;
    double best = 0.0;
    for (std::size_t j = 0; j < ncols_; ++j) {
      int dir = 0;
      const double dj = d_[j];
      switch (state_[j]) {
        case State::Basic:
          continue;
        case State::AtLower:
          if (upper_[j] > lower_[j] && dj < -settings_.dual_tol) dir = 1;
          break;
        case State::AtUpper:
          if (upper_[j] > lower_[j] && dj > settings_.dual_tol) dir = -1;
          break;
        case State::Free:
          if (std::abs(dj) > settings_.dual_tol) dir = dj < 0.0 ? 1 : -1;
          break;
      }
      if (dir == 0) continue;
      if (bland) {
        q = j;
        direction = dir;
        break;
      }
      if (std::abs(dj) > best) {
        best = std::abs(dj);
        q = j;
        direction = dir;
      }
    }

    if (q == ncols_) {
      if (!fresh && max_primal_infeasibility() > 10.0 * settings_.primal_tol) {
        if (!refactor()) return SimplexResult::Singular;
        fresh = true;
        continue;
      }
      return SimplexResult::Optimal;
    }

    // Ratio test. g is the rate of change of each basic variable.
    const double dir = static_cast<double>(direction);
    std::size_t leave = m_;
    double step = kInfinity;
    if (bland) {
      for (std::size_t i = 0; i < m_; ++i) {
        const double g = -dir * tab(i, q);
        const auto col = static_cast<std::size_t>(head_[i]);
        double ratio;
        if (g < -settings_.pivot_tol && std::isfinite(lower_[col])) {
          ratio = std::max(0.0, (x_[col] - lower_[col]) / -g);
        } else if (g > settings_.pivot_tol && std::isfinite(upper_[col])) {
          ratio = std::max(0.0, (upper_[col] - x_[col]) / g);
        } else {
          continue;
        }
        if (ratio < step - kTie || (ratio <= step + kTie && leave < m_ && head_[i] < head_[leave])) {
          step = ratio;
          leave = i;
        }
      }
    } else {
      // Harris two-pass: bound the step with relaxed bounds, then take the
      // largest pivot among rows that block within that bound.
      double relaxed = kInfinity;
      for (std::size_t i = 0; i < m_; ++i) {
        const double g = -dir * tab(i, q);
        const auto col = static_cast<std::size_t>(head_[i]);
        if (g < -settings_.pivot_tol && std::isfinite(lower_[col])) {
          relaxed = std::min(relaxed, (x_[col] - lower_[col] + settings_.primal_tol) / -g);
        } else if (g > settings_.pivot_tol && std::isfinite(upper_[col])) {
          relaxed = std::min(relaxed, (upper_[col] - x_[col] + settings_.primal_tol) / g);
        }
      }
      double largest = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double g = -dir * tab(i, q);
        const auto col = static_cast<std::size_t>(head_[i]);
        double ratio;
        if (g < -settings_.pivot_tol && std::isfinite(lower_[col])) {
          ratio = (x_[col] - lower_[col]) / -g;
        } else if (g > settings_.pivot_tol && std::isfinite(upper_[col])) {
          ratio = (upper_[col] - x_[col]) / g;
        } else {
          continue;
        }
        if (ratio <= relaxed && std::abs(g) > largest) {
          largest = std::abs(g);
          leave = i;
          step = std::max(0.0, ratio);
        }
      }
    }

    const double flip = (std::isfinite(lower_[q]) && std::isfinite(upper_[q])) ? upper_[q] - lower_[q] : kInfinity;
    const bool do_flip = flip <= step;
    if (do_flip) step = flip;
    if (!std::isfinite(step)) return SimplexResult::Unbounded;

    degenerate = step <= 1e-11 ? degenerate + 1 : 0;
    ++iterations_;

    if (step != 0.0) {
      x_[q] += dir * step;
      for (std::size_t i = 0; i < m_; ++i) {
        const double t = tab(i, q);
        if (t != 0.0) x_[static_cast<std::size_t>(head_[i])] -= dir * step * t;
      }
    }
    if (do_flip) {
      if (direction > 0) {
        state_[q] = State::AtUpper;
        x_[q] = upper_[q];
      } else {
        state_[q] = State::AtLower;
        x_[q] = lower_[q];
      }
      continue;
    }

    const auto leaving = static_cast<std::size_t>(head_[leave]);
    const double g = -dir * tab(leave, q);
    pivot(leave, q);
    fresh = false;
    if (g < 0.0) {
      x_[leaving] = lower_[leaving];
      state_[leaving] = State::AtLower;
    } else {
      x_[leaving] = upper_[leaving];
      state_[leaving] = lower_[leaving] == upper_[leaving] ? State::AtLower : State::AtUpper;
    }
  }
}

SimplexResult DenseSimplex::dual_loop() {
  std::size_t degenerate = 0;
  for (;;) {
    if (iterations_ - call_start_ >= limit()) return SimplexResult::IterationLimit;
    if (since_refactor_ >= settings_.refactor_interval) {
      if (!refactor()) return SimplexResult::Singular;
    }
    const bool bland = degenerate >= settings_.degenerate_before_bland;

    std::size_t r = m_;
    double worst = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto col = static_cast<std::size_t>(head_[i]);
      double infeasibility = 0.0;
      if (x_[col] < lower_[col] - settings_.primal_tol) {
        infeasibility = lower_[col] - x_[col];
      } else if (x_[col] > upper_[col] + settings_.primal_tol) {
        infeasibility = x_[col] - upper_[col];
      }
      if (infeasibility <= 0.0) continue;
      if (bland) {
        if (r == m_ || head_[i] < head_[r]) r = i;
      } else if (infeasibility > worst) {
        worst = infeasibility;
        r = i;
      }
    }
    if (r == m_) return SimplexResult::Optimal;

    const auto leaving = static_cast<std::size_t>(head_[r]);
    const bool to_lower = x_[leaving] < lower_[leaving];
    const double target = to_lower ? lower_[leaving] : upper_[leaving];
    // x_leaving changes by -alpha_j * delta_j; it must move toward target.
    const double want = to_lower ? 1.0 : -1.0;

    auto eligible = [&](std::size_t j, double alpha) {
      if (std::abs(alpha) <= settings_.pivot_tol) return false;
      const double delta_sign = -want * (alpha > 0.0 ? 1.0 : -1.0);
      switch (state_[j]) {
        case State::Basic:
          return false;
        case State::AtLower:
          return upper_[j] > lower_[j] && delta_sign > 0.0;
        case State::AtUpper:
          return upper_[j] > lower_[j] && delta_sign < 0.0;
        case State::Free:
          return true;
      }
      return false;
    };

    std::size_t q = ncols_;
    if (bland) {
      double best = kInfinity;
      for (std::size_t j = 0; j < ncols_; ++j) {
        const double alpha = tab(r, j);
        if (!eligible(j, alpha)) continue;
        const double ratio = std::abs(d_[j]) / std::abs(alpha);
        if (ratio < best - kTie) {
          best = ratio;
          q = j;
        }
      }
    } else {
      double relaxed = kInfinity;
      for (std::size_t j = 0; j < ncols_; ++j) {
        const double alpha = tab(r, j);
        if (!eligible(j, alpha)) continue;
        relaxed = std::min(relaxed, (std::abs(d_[j]) + settings_.dual_tol) / std::abs(alpha));
      }
      double largest = 0.0;
      for (std::size_t j = 0; j < ncols_; ++j) {
        const double alpha = tab(r, j);
        if (!eligible(j, alpha)) continue;
        if (std::abs(d_[j]) / std::abs(alpha) <= relaxed && std::abs(alpha) > largest) {
          largest = std::abs(alpha);
          q = j;
        }
      }
    }
    if (q == ncols_) return SimplexResult::Infeasible;

    const double alpha = tab(r, q);
    degenerate = std::abs(d_[q]) / std::abs(alpha) <= 1e-12 ? degenerate + 1 : 0;
    ++iterations_;

    const double delta = (x_[leaving] - target) / alpha;
    x_[q] += delta;
    for (std::size_t i = 0; i < m_; ++i) {
      const double t = tab(i, q);
      if (t != 0.0) x_[static_cast<std::size_t>(head_[i])] -= t * delta;
    }
    pivot(r, q);
    x_[leaving] = target;
    state_[leaving] = to_lower || lower_[leaving] == upper_[leaving] ? State::AtLower : State::AtUpper;
  }
}

void DenseSimplex::drop_artificials() {
  const std::size_t first_art = n_ + m_;
  // Try to pivot basic artificials out on any usable non-artificial column.
  for (std::size_t r = 0; r < m_; ++r) {
    const auto col = static_cast<std::size_t>(head_[r]);
    if (col < first_art) continue;
    std::size_t best_col = first_art;
    double best = 1e-7;
    for (std::size_t c = 0; c < first_art; ++c) {
      if (state_[c] == State::Basic) continue;
      if (std::abs(tab(r, c)) > best) {
        best = std::abs(tab(r, c));
        best_col = c;
      }
    }
    if (best_col == first_art) continue;
    const double delta = x_[col] / tab(r, best_col);
    x_[best_col] += delta;
    for (std::size_t i = 0; i < m_; ++i) {
      const double t = tab(i, best_col);
      if (t != 0.0) x_[static_cast<std::size_t>(head_[i])] -= t * delta;
    }
    pivot(r, best_col);
    x_[col] = 0.0;
    state_[col] = State::AtLower;
  }

  std::vector<std::size_t> keep;
  keep.reserve(ncols_);
  for (std::size_t c = 0; c < first_art; ++c) keep.push_back(c);
  std::vector<std::size_t> kept_rows;
  std::vector<double> kept_signs;
  for (std::size_t a = 0; a < art_row_.size(); ++a) {
    if (pos_[first_art + a] >= 0) {
      keep.push_back(first_art + a);
      kept_rows.push_back(art_row_[a]);
      kept_signs.push_back(art_sign_[a]);
    }
  }
  if (keep.size() == ncols_) {
    for (std::size_t c = first_art; c < ncols_; ++c) upper_[c] = 0.0;
    return;
  }

  const std::size_t new_cols = keep.size();
  std::vector<double> tableau(m_ * new_cols);
  for (std::size_t r = 0; r < m_; ++r) {
    for (std::size_t k = 0; k < new_cols; ++k) tableau[r * new_cols + k] = tab(r, keep[k]);
  }
  auto remap = [&](auto& vec) {
    std::remove_reference_t<decltype(vec)> out(new_cols);
    for (std::size_t k = 0; k < new_cols; ++k) out[k] = vec[keep[k]];
    vec.swap(out);
  };
  remap(x_);
  remap(lower_);
  remap(upper_);
  remap(state_);
  remap(cost_);
  remap(d_);
  std::vector<int> new_index(ncols_, -1);
  for (std::size_t k = 0; k < new_cols; ++k) new_index[keep[k]] = static_cast<int>(k);
  for (auto& h : head_) h = new_index[static_cast<std::size_t>(h)];

  tableau_.swap(tableau);
  ncols_ = new_cols;
  art_row_ = kept_rows;
  art_sign_ = kept_signs;
  pos_.assign(ncols_, -1);
  for (std::size_t r = 0; r < m_; ++r) pos_[static_cast<std::size_t>(head_[r])] = static_cast<int>(r);
  for (std::size_t c = first_art; c < ncols_; ++c) {
    lower_[c] = 0.0;
    upper_[c] = 0.0;
  }
}

SimplexResult DenseSimplex::solve() {
  call_start_ = iterations_;
  setup_initial_basis();
  solved_ = false;

  if (!art_row_.empty()) {
    phase_cost_.assign(ncols_, 0.0);
    for (std::size_t c = n_ + m_; c < ncols_; ++c) phase_cost_[c] = 1.0;
    compute_reduced_costs();
    const SimplexResult phase1 = primal_loop();
    if (phase1 == SimplexResult::IterationLimit || phase1 == SimplexResult::Singular) return phase1;
    if (phase1 == SimplexResult::Unbounded) return SimplexResult::Singular;
    double infeasibility = 0.0;
    double scale = 1.0;
    for (double v : b_) scale = std::max(scale, std::abs(v));
    for (std::size_t c = n_ + m_; c < ncols_; ++c) infeasibility += std::abs(x_[c]);
    if (infeasibility > 1e-8 * scale) return SimplexResult::Infeasible;
    drop_artificials();
  }

  phase_cost_ = cost_;
  compute_reduced_costs();
  const SimplexResult result = primal_loop();
  solved_ = result == SimplexResult::Optimal;
  return result;
}

void DenseSimplex::set_structural_bounds(std::size_t column, double lower, double upper) {
  lower_[column] = lower;
  upper_[column] = upper;
  if (!solved_ || state_[column] == State::Basic) return;
  double target;
  if (std::isfinite(lower) && (d_[column] >= 0.0 || !std::isfinite(upper))) {
    state_[column] = State::AtLower;
    target = lower;
  } else if (std::isfinite(upper)) {
    state_[column] = State::AtUpper;
    target = upper;
  } else {
    state_[column] = State::Free;
    target = 0.0;
  }
  const double delta = target - x_[column];
  if (delta == 0.0) return;
  x_[column] = target;
  for (std::size_t i = 0; i < m_; ++i) {
    const double t = tab(i, column);
    if (t != 0.0) x_[static_cast<std::size_t>(head_[i])] -= t * delta;
  }
}

bool DenseSimplex::repair_dual_feasibility() {
  for (std::size_t j = 0; j < ncols_; ++j) {
    double target = 0.0;
    State next = state_[j];
    switch (state_[j]) {
      case State::Basic:
        continue;
      case State::AtLower:
        if (upper_[j] == lower_[j] || d_[j] >= -settings_.dual_tol) continue;
        if (!std::isfinite(upper_[j])) return false;
        next = State::AtUpper;
        target = upper_[j];
        break;
      case State::AtUpper:
        if (upper_[j] == lower_[j] || d_[j] <= settings_.dual_tol) continue;
        if (!std::isfinite(lower_[j])) return false;
        next = State::AtLower;
        target = lower_[j];
        break;
      case State::Free:
        if (std::abs(d_[j]) <= settings_.dual_tol) continue;
        return false;
    }
    const double delta = target - x_[j];
    x_[j] = target;
    state_[j] = next;
    for (std::size_t i = 0; i < m_; ++i) {
      const double t = tab(i, j);
      if (t != 0.0) x_[static_cast<std::size_t>(head_[i])] -= t * delta;
    }
  }
  return true;
}

SimplexResult DenseSimplex::reoptimize() {
  if (!solved_) return solve();
  if (!repair_dual_feasibility()) return solve();
  call_start_ = iterations_;
  SimplexResult result = dual_loop();
  if (result == SimplexResult::Optimal) result = primal_loop();
  if (result == SimplexResult::IterationLimit || result == SimplexResult::Singular) return solve();
  solved_ = result == SimplexResult::Optimal;
  return result;
}

bool DenseSimplex::can_snapshot() const { return solved_; }

DenseSimplex::Basis DenseSimplex::basis() const {
  Basis basis;
  basis.basic_columns = head_;
  basis.state = state_;
  basis.lower.assign(lower_.begin(), lower_.begin() + static_cast<std::ptrdiff_t>(n_));
  basis.upper.assign(upper_.begin(), upper_.begin() + static_cast<std::ptrdiff_t>(n_));
  return basis;
}

bool DenseSimplex::restore(const Basis& basis) {
  if (basis.state.size() != ncols_ || basis.basic_columns.size() != m_) return false;
  for (std::size_t j = 0; j < n_; ++j) {
    lower_[j] = basis.lower[j];
    upper_[j] = basis.upper[j];
  }
  state_ = basis.state;
  head_ = basis.basic_columns;
  for (std::size_t c = 0; c < ncols_; ++c) {
    switch (state_[c]) {
      case State::Basic:
        break;
      case State::AtLower:
        x_[c] = lower_[c];
        break;
      case State::AtUpper:
        x_[c] = upper_[c];
        break;
      case State::Free:
        x_[c] = 0.0;
        break;
    }
  }
  phase_cost_ = cost_;
  if (!refactor()) {
    solved_ = false;
    return false;
  }
  solved_ = true;
  return true;
}

std::vector<double> DenseSimplex::primal() const {
  return {x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_)};
}

std::vector<double> DenseSimplex::duals() const {
  std::vector<double> y(m_);
  for (std::size_t r = 0; r < m_; ++r) y[r] = -d_[n_ + r] * row_scale_[r];
  return y;
}

double DenseSimplex::objective() const {
  double value = 0.0;
  for (std::size_t j = 0; j < n_; ++j) value += cost_[j] * x_[j];
  return value;
}

}  // namespace bltune::detail
