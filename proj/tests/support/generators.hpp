#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "bltune/dataset.hpp"
#include "bltune/lp.hpp"
#include "bltune/mip.hpp"

namespace bltune::testgen {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int integer(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Small-integer coefficients make ties and degenerate vertices common.
inline double coefficient(Rng& rng) { return static_cast<double>(integer(rng, -4, 4)); }

/// Finite box, rows built around a random point so most instances are
/// feasible; a few get a row that contradicts the box.
inline LinearProgram random_lp(Rng& rng, std::size_t n, std::size_t m) {
  LinearProgram lp;
  std::vector<double> x0(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double lo = static_cast<double>(integer(rng, -5, 0));
    const double hi = lo + static_cast<double>(integer(rng, 1, 6));
    lp.bounds.push_back({lo, hi});
    x0[j] = uniform(rng, lo, hi);
    lp.objective.push_back(coefficient(rng));
  }
  for (std::size_t r = 0; r < m; ++r) {
    Constraint c;
    double lhs = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      c.coefficients.push_back(coefficient(rng));
      lhs += c.coefficients.back() * x0[j];
    }
    const int kind = integer(rng, 0, 9);
    if (kind < 4) {
      c.relation = Relation::LessEqual;
      c.rhs = std::ceil(lhs) + integer(rng, 0, 2);
    } else if (kind < 8) {
      c.relation = Relation::GreaterEqual;
      c.rhs = std::floor(lhs) - integer(rng, 0, 2);
    } else {
      c.relation = Relation::Equal;
      c.rhs = lhs;
    }
    lp.rows.push_back(std::move(c));
  }
  if (integer(rng, 0, 9) == 0 && n > 0) {
    // x_0 >= upper + 1
    Constraint c;
    c.coefficients.assign(n, 0.0);
    c.coefficients[0] = 1.0;
    c.relation = Relation::GreaterEqual;
    c.rhs = lp.bounds[0].upper + 1.0;
    lp.rows.push_back(std::move(c));
  }
  return lp;
}

/// Duplicated rows and zero right-hand sides around a vertex at the origin.
inline LinearProgram random_degenerate_lp(Rng& rng, std::size_t n, std::size_t m) {
  LinearProgram lp;
  for (std::size_t j = 0; j < n; ++j) {
    lp.bounds.push_back({-3.0, 3.0});
    lp.objective.push_back(coefficient(rng));
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (r > 0 && integer(rng, 0, 2) == 0) {
      lp.rows.push_back(lp.rows[static_cast<std::size_t>(integer(rng, 0, static_cast<int>(r) - 1))]);
      continue;
    }
    Constraint c;
    for (std::size_t j = 0; j < n; ++j) c.coefficients.push_back(coefficient(rng));
    c.relation = Relation::LessEqual;
    c.rhs = 0.0;
    lp.rows.push_back(std::move(c));
  }
  return lp;
}

/// `binaries` 0/1 columns followed by `continuous` boxed columns.
inline MipProblem random_mip(Rng& rng, std::size_t binaries, std::size_t continuous, std::size_t m) {
  const std::size_t n = binaries + continuous;
  MipProblem mip;
  LinearProgram& lp = mip.base;
  std::vector<double> x0(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j < binaries) {
      lp.bounds.push_back({0.0, 1.0});
      mip.binaries.push_back(j);
      x0[j] = static_cast<double>(integer(rng, 0, 1));
    } else {
      lp.bounds.push_back({-3.0, 3.0});
      x0[j] = uniform(rng, -3.0, 3.0);
    }
    lp.objective.push_back(coefficient(rng));
  }
  for (std::size_t r = 0; r < m; ++r) {
    Constraint c;
    double lhs = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      c.coefficients.push_back(coefficient(rng));
      lhs += c.coefficients.back() * x0[j];
    }
    if (integer(rng, 0, 1) == 0) {
      c.relation = Relation::LessEqual;
      c.rhs = std::ceil(lhs) + integer(rng, 0, 1);
    } else {
      c.relation = Relation::GreaterEqual;
      c.rhs = std::floor(lhs) - integer(rng, 0, 1);
    }
    lp.rows.push_back(std::move(c));
  }
  return mip;
}

/// Gaussian classes around +mu and -mu; both labels always present.
inline LabeledDataset random_dataset(Rng& rng, std::size_t n, std::size_t p, double separation) {
  LabeledDataset d;
  d.num_features = p;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> mu(p);
  for (double& v : mu) v = gauss(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i == 0 ? 1 : i == 1 ? -1 : (integer(rng, 0, 1) == 0 ? 1 : -1);
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) x[j] = y * separation * mu[j] + gauss(rng);
    d.push_back(x, y);
  }
  return d;
}

/// One feature with values on a 0.05 lattice in [-2, 2].
inline LabeledDataset random_1d(Rng& rng, std::size_t n, double label_noise) {
  LabeledDataset d;
  d.num_features = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(integer(rng, -40, 40)) * 0.05;
    int y = x > 0 ? 1 : -1;
    if (uniform(rng, 0.0, 1.0) < label_noise) y = -y;
    if (i == 0) y = 1;
    if (i == 1) y = -1;
    d.push_back(std::vector<double>{x}, y);
  }
  return d;
}

}  // namespace bltune::testgen
