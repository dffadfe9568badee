#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ucscreen/common.hpp"

namespace ucscreen {

enum class Relation { LessEqual, Equal, GreaterEqual };

// Dense LP: minimize (or maximize) c.y subject to row relations and
// variable bounds. +-inf bounds are allowed; row widths equal num_vars().
struct LpProblem {
  Eigen::VectorXd objective;           // length n
  bool maximize = false;
  Eigen::VectorXd lower;               // length n, may be -inf
  Eigen::VectorXd upper;               // length n, may be +inf
  Eigen::MatrixXd A;                   // m x n
  std::vector<Relation> relations;     // length m
  Eigen::VectorXd rhs;                 // length m

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_constraints() const { return static_cast<int>(rhs.size()); }

  void validate() const;  // throws ValidationError

  // Convenience for incremental construction.
  static LpProblem with_sizes(int n_vars, int n_rows);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, Stalled };

std::string to_string(LpStatus s);

// Certified solution. When status == Optimal the solver guarantees
//   - primal residual <= 1e-7,
//   - |dual_k * slack_k| <= 1e-6 for every row,
//   - relative duality gap <= 1e-6.
// `active_rows` lists constraint rows tight at the optimum (default
// tolerance); bound activity is recovered via active_set() below.
struct LpSolution {
  LpStatus status = LpStatus::Stalled;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals;          // one per row, multipliers of the stated relations
  std::vector<int> active_rows;   // row indices tight at optimum
  int iterations = 0;
};

struct LpOptions {
  Tolerances tol;
  int max_iterations = 0;      // 0 -> automatic from problem size
  int stall_switch = 500;      // degenerate steps before switching to Bland's rule
};

// Bounded-variable two-phase primal simplex, Dantzig pricing with Bland's
// rule fallback after a stall. Deterministic: identical input gives
// bit-identical status and objective.
LpSolution solve_lp(const LpProblem& p, const LpOptions& opts = {});

// Indices of constraints tight at the optimum within `tol`, variable bounds
// included. Index layout: k in [0, m) is row k; m + 2j is the lower bound of
// variable j; m + 2j + 1 its upper bound.
std::vector<int> active_set(const LpProblem& p, const LpSolution& sol, double tol);

}  // namespace ucscreen
