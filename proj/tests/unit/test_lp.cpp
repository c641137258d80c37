#include <cmath>

#include "bltune/error.hpp"
#include "bltune/lp.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"

using namespace bltune;

namespace {

LinearProgram single_vertex() {
  LinearProgram lp;
  lp.objective = {-1.0};
  lp.rows.push_back({{1.0}, Relation::LessEqual, 1.0});
  lp.bounds = {{0.0, kInfinity}};
  return lp;
}

}  // namespace

TEST_CASE("single vertex LP") {
  const LpSolution sol = solve_lp(single_vertex());
  CHECK(sol.status == LpStatus::Optimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0));
  CHECK(sol.objective_value == doctest::Approx(-1.0));
}

TEST_CASE("contradictory rows are infeasible") {
  LinearProgram lp;
  lp.objective = {1.0};
  lp.rows.push_back({{1.0}, Relation::GreaterEqual, 1.0});
  lp.rows.push_back({{1.0}, Relation::LessEqual, 0.0});
  lp.bounds = {{-kInfinity, kInfinity}};
  CHECK(solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("unbounded ray") {
  LinearProgram lp;
  lp.objective = {-1.0, 0.0};
  lp.rows.push_back({{1.0, -1.0}, Relation::LessEqual, 2.0});
  lp.bounds = {{0.0, kInfinity}, {0.0, kInfinity}};
  CHECK(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("free variables and equality rows") {
  // x = 3 - y turns the objective into 3 + y, so y drops to its bound -4.
  LinearProgram lp;
  lp.objective = {1.0, 2.0};
  lp.rows.push_back({{1.0, 1.0}, Relation::Equal, 3.0});
  lp.rows.push_back({{1.0, -1.0}, Relation::GreaterEqual, -1.0});
  lp.bounds = {{-kInfinity, kInfinity}, {-4.0, kInfinity}};
  const LpSolution sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.primal[0] == doctest::Approx(7.0));
  CHECK(sol.primal[1] == doctest::Approx(-4.0));
  CHECK(check_solution(lp, sol).passed);
}

TEST_CASE("malformed problems are rejected") {
  LinearProgram lp = single_vertex();
  lp.rows[0].coefficients.push_back(1.0);
  CHECK_THROWS_AS(solve_lp(lp), Error);
  lp = single_vertex();
  lp.bounds[0] = {2.0, 1.0};
  CHECK_THROWS_AS(solve_lp(lp), Error);
  lp = single_vertex();
  lp.rows[0].rhs = std::nan("");
  CHECK_THROWS_AS(solve_lp(lp), Error);
}

TEST_CASE("certificate of the single vertex LP is clean") {
  const LinearProgram lp = single_vertex();
  const CertificateReport r = check_solution(lp, solve_lp(lp));
  CHECK(r.passed);
  CHECK(r.max_primal_violation == 0.0);
  CHECK(r.max_dual_violation == 0.0);
  CHECK(r.duality_gap == doctest::Approx(0.0));
}

TEST_CASE("perturbed primal on a tight row fails the certificate") {
  const LinearProgram lp = single_vertex();
  LpSolution sol = solve_lp(lp);
  sol.primal[0] += 1e-3;
  const CertificateReport r = check_solution(lp, sol);
  CHECK(r.max_primal_violation == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK_FALSE(r.passed);
}

TEST_CASE("random 5-variable 6-row LPs match vertex enumeration") {
  testgen::Rng rng(11);
  int optimal = 0;
  for (int t = 0; t < 100; ++t) {
    const LinearProgram lp = testgen::random_lp(rng, 5, 6);
    const oracle::Result ref = oracle::enumerate_vertices(lp);
    const LpSolution sol = solve_lp(lp);
    CHECK((sol.status == LpStatus::Optimal) == ref.feasible);
    if (sol.status != LpStatus::Optimal || !ref.feasible) continue;
    ++optimal;
    CHECK(std::abs(sol.objective_value - ref.value) <= 1e-8 * (1.0 + std::abs(ref.value)));
    CHECK(check_solution(lp, sol).passed);
  }
  CHECK(optimal > 50);
}

TEST_CASE("duals follow the sign convention") {
  // min x + y  s.t. x + y >= 2, x <= 5: the >= row is tight with dual 1.
  LinearProgram lp;
  lp.objective = {1.0, 1.0};
  lp.rows.push_back({{1.0, 1.0}, Relation::GreaterEqual, 2.0});
  lp.rows.push_back({{1.0, 0.0}, Relation::LessEqual, 5.0});
  lp.bounds = {{0.0, kInfinity}, {0.0, kInfinity}};
  const LpSolution sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.duals[0] == doctest::Approx(1.0));
  CHECK(sol.duals[1] == doctest::Approx(0.0));
}

TEST_CASE("degenerate LPs terminate") {
  testgen::Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const LinearProgram lp = testgen::random_degenerate_lp(rng, 4 + static_cast<std::size_t>(t % 4), 8);
    const LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    const oracle::Result ref = oracle::enumerate_vertices(lp);
    CHECK(sol.objective_value == doctest::Approx(ref.value).epsilon(1e-8));
  }
}

TEST_CASE("dump round trip") {
  testgen::Rng rng(3);
  const LinearProgram lp = testgen::random_lp(rng, 3, 2);
  const LinearProgram back = parse_lp_dump(dump_lp(lp));
  CHECK(back.objective == lp.objective);
  REQUIRE(back.rows.size() == lp.rows.size());
  for (std::size_t r = 0; r < lp.rows.size(); ++r) {
    CHECK(back.rows[r].coefficients == lp.rows[r].coefficients);
    CHECK(back.rows[r].relation == lp.rows[r].relation);
    CHECK(back.rows[r].rhs == lp.rows[r].rhs);
  }
  CHECK(dump_lp(back) == dump_lp(lp));
  CHECK_THROWS_AS(parse_lp_dump("min 1 x\n"), Error);
}
