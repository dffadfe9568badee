#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "oracles.hpp"
#include "ucscreen/lp.hpp"

using namespace ucscreen;
using namespace ucscreen::testing;

namespace {

LpProblem single_var(double lo, double hi, double c, bool maximize = false) {
  LpProblem p = LpProblem::with_sizes(1, 2);
  p.objective[0] = c;
  p.maximize = maximize;
  p.A(0, 0) = 1.0;
  p.relations[0] = Relation::GreaterEqual;
  p.rhs[0] = lo;
  p.A(1, 0) = 1.0;
  p.relations[1] = Relation::LessEqual;
  p.rhs[1] = hi;
  return p;
}

// Reconstructed dual objective for a minimize problem: pi.b plus the reduced
// costs of variables pinned at finite bounds.
double dual_objective(const LpProblem& p, const LpSolution& sol) {
  const Eigen::VectorXd c = p.maximize ? (-p.objective).eval() : p.objective;
  const Eigen::VectorXd pi = p.maximize ? (-sol.duals).eval() : sol.duals;
  const Eigen::VectorXd d = c - p.A.transpose() * pi;
  double v = pi.dot(p.rhs);
  for (int j = 0; j < p.num_vars(); ++j) {
    if (std::abs(d[j]) < 1e-7) continue;
    if (d[j] > 0.0 && std::isfinite(p.lower[j])) v += d[j] * p.lower[j];
    else if (d[j] < 0.0 && std::isfinite(p.upper[j])) v += d[j] * p.upper[j];
  }
  return p.maximize ? -v : v;
}

}  // namespace

TEST_CASE("min x subject to x >= 1, x <= 3") {
  const LpProblem p = single_var(1.0, 3.0, 1.0);
  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0));
  CHECK(sol.objective == doctest::Approx(1.0));
  const auto act = active_set(p, sol, 1e-6);
  REQUIRE(act.size() == 1);
  CHECK(act[0] == 0);  // the x >= 1 row
}

TEST_CASE("max x+y subject to x+y <= 2, x,y >= 0") {
  LpProblem p = LpProblem::with_sizes(2, 1);
  p.objective << 1.0, 1.0;
  p.maximize = true;
  p.lower << 0.0, 0.0;
  p.A(0, 0) = 1.0;
  p.A(0, 1) = 1.0;
  p.rhs[0] = 2.0;
  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
}

TEST_CASE("min x subject to x <= 0, x >= 1 is infeasible") {
  LpProblem p = LpProblem::with_sizes(1, 2);
  p.objective[0] = 1.0;
  p.A(0, 0) = 1.0;
  p.relations[0] = Relation::LessEqual;
  p.rhs[0] = 0.0;
  p.A(1, 0) = 1.0;
  p.relations[1] = Relation::GreaterEqual;
  p.rhs[1] = 1.0;
  CHECK(solve_lp(p).status == LpStatus::Infeasible);
}

TEST_CASE("min -x subject to x >= 0 is unbounded") {
  LpProblem p = LpProblem::with_sizes(1, 1);
  p.objective[0] = -1.0;
  p.A(0, 0) = 1.0;
  p.relations[0] = Relation::GreaterEqual;
  p.rhs[0] = 0.0;
  CHECK(solve_lp(p).status == LpStatus::Unbounded);
}

TEST_CASE("degenerate vertex reports every tight constraint") {
  // Three lines through (1,1) in 2-D; optimum sits on all of them.
  LpProblem p = LpProblem::with_sizes(2, 3);
  p.objective << 1.0, 1.0;
  p.A << 1.0, 0.0,   // x >= 1
      0.0, 1.0,      // y >= 1
      1.0, 1.0;      // x + y >= 2 (redundant, tight at the optimum)
  p.relations = {Relation::GreaterEqual, Relation::GreaterEqual,
                 Relation::GreaterEqual};
  p.rhs << 1.0, 1.0, 2.0;
  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
  // Verify by substitution: x=(1,1) satisfies all three with equality.
  CHECK(sol.x[0] == doctest::Approx(1.0));
  CHECK(sol.x[1] == doctest::Approx(1.0));
  CHECK(active_set(p, sol, 1e-6).size() == 3);
}

TEST_CASE("constant objective can leave the active set empty") {
  LpProblem p = LpProblem::with_sizes(1, 2);
  p.objective[0] = 0.0;
  p.A(0, 0) = 1.0;
  p.relations[0] = Relation::LessEqual;
  p.rhs[0] = 10.0;
  p.A(1, 0) = 1.0;
  p.relations[1] = Relation::GreaterEqual;
  p.rhs[1] = -10.0;
  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  // The solver may sit anywhere; the important part is that nothing forces a
  // tight row into the certificate.
  CHECK(sol.objective == doctest::Approx(0.0));
}

TEST_CASE("free variable with one-sided bound respects the bound") {
  // max y subject to y <= 3, y otherwise free.
  LpProblem p = LpProblem::with_sizes(1, 0);
  p.objective[0] = 1.0;
  p.maximize = true;
  p.upper[0] = 3.0;
  const LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(3.0));
}

TEST_CASE("oracle equivalence on 500 random LPs") {
  Rng rng(20240601);
  int optimal_seen = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const LpProblem p = random_lp(rng);
    const LpSolution sol = solve_lp(p);
    const OracleResult oracle = lp_oracle(p);
    CAPTURE(trial);
    REQUIRE(sol.status != LpStatus::Stalled);
    // Regions here are boxes cut by rows, hence bounded: never unbounded.
    REQUIRE(sol.status != LpStatus::Unbounded);
    if (sol.status == LpStatus::Optimal) {
      ++optimal_seen;
      REQUIRE_MESSAGE(oracle.feasible, "solver says optimal, oracle found nothing");
      CHECK(sol.objective ==
            doctest::Approx(oracle.objective).epsilon(1e-6).scale(1.0));
    } else {
      REQUIRE_MESSAGE(!oracle.feasible, "solver says infeasible, oracle disagrees");
    }
  }
  CHECK(optimal_seen > 200);  // the generator should not degenerate
}

TEST_CASE("weak and strong duality on every optimal result") {
  Rng rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    const LpProblem p = random_lp(rng);
    const LpSolution sol = solve_lp(p);
    if (sol.status != LpStatus::Optimal) continue;
    CAPTURE(trial);
    // Complementary slackness per row.
    const Eigen::VectorXd row_vals = p.A * sol.x;
    for (int k = 0; k < p.num_constraints(); ++k) {
      if (p.relations[k] == Relation::Equal) continue;
      const double slack = p.rhs[k] - row_vals[k];
      CHECK(std::abs(sol.duals[k] * slack) <= 1e-6 * std::max(1.0, std::abs(sol.objective)));
    }
    // Duality gap.
    const double dual_obj = dual_objective(p, sol);
    CHECK(std::abs(dual_obj - sol.objective) <=
          1e-6 * std::max(1.0, std::abs(sol.objective)));
  }
}

TEST_CASE("determinism: repeated solves bit-identical") {
  Rng rng(31337);
  for (int trial = 0; trial < 50; ++trial) {
    const LpProblem p = random_lp(rng);
    const LpSolution a = solve_lp(p);
    const LpSolution b = solve_lp(p);
    REQUIRE(a.status == b.status);
    if (a.status == LpStatus::Optimal) {
      CHECK(a.objective == b.objective);  // bitwise
      CHECK(a.iterations == b.iterations);
    }
  }
}
