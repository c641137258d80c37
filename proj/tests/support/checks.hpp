#pragma once

// Property suites shared by the acceptance binary and `bltune selftest`.
// Each one draws its instances from a seeded generator, so a given count
// and seed always checks the same cases.

#include <cstddef>
#include <cstdint>
#include <string>

#include "bltune/dataset.hpp"

namespace bltune::checks {

struct Outcome {
  bool passed = true;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::size_t skipped = 0;
  /// Pessimistic solves whose big-M guard was still flagged at the end.
  std::size_t big_m_flagged = 0;
  std::string detail;

  void fail(const std::string& what);
  void merge(const Outcome& other);
};

/// Random LPs with 2 to `max_vars` variables against vertex enumeration.
Outcome lp_against_enumeration(std::size_t count, std::size_t max_vars, std::uint64_t seed);

/// Random MIPs with 1 to `max_binaries` binaries against enumerating every
/// assignment.
Outcome mip_against_enumeration(std::size_t count, std::size_t max_binaries, std::uint64_t seed);

/// Over a random set of 50 models and 10 validation points, the largest
/// count of sign errors equals |V| minus the smallest count under flipped
/// labels.
Outcome flip_identity(std::size_t count, std::uint64_t seed);

/// compute_flip_sets covers the validation indices with disjoint V1, V2, V3
/// and the margin 0-1 loss totals |V1| + |V3|.
Outcome flip_partition(std::size_t count, std::uint64_t seed);

/// One-feature instances: optimistic and pessimistic (epsilon 0) values
/// against the brute-force oracle within `tolerance`.
Outcome bilevel_oracle(std::size_t count, double tolerance, std::uint64_t seed);

/// optimistic <= pessimistic(0) <= worst case at the optimistic w_bar on
/// synthetic instances and, when `cancer` is nonempty, subsamples of it.
Outcome bound_chain(std::size_t count, const LabeledDataset& cancer, std::uint64_t seed);

/// Pessimistic and worst-case values nondecreasing over epsilon in
/// {0, 0.2, 0.4, 0.6}, with worst case >= pessimistic at every epsilon.
Outcome epsilon_monotone(std::size_t count, const LabeledDataset& cancer, std::uint64_t seed);

/// Budget, accuracy harm and the zero-budget no-op on random attack runs.
Outcome attack_invariants(std::size_t count, std::uint64_t seed);

}  // namespace bltune::checks
