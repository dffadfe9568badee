#pragma once

#include <functional>
#include <vector>

#include "ucscreen/lp.hpp"

namespace ucscreen {

// LP plus a set of variables restricted to {0,1}. Binary indices must carry
// bounds inside [0,1].
struct MilpProblem {
  LpProblem lp;
  std::vector<int> binary_indices;

  void validate() const;
};

enum class MilpStatus { Optimal, Infeasible, NodeLimit };

std::string to_string(MilpStatus s);

struct MilpSolution {
  MilpStatus status = MilpStatus::Infeasible;
  Eigen::VectorXd x;          // binaries integral within 1e-6
  double objective = 0.0;
  long node_count = 0;
  double wall_seconds = 0.0;
  bool has_incumbent = false; // meaningful when status == NodeLimit
};

struct MilpOptions {
  double gap = 1e-6;          // relative optimality gap
  long node_limit = 1000000;
  LpOptions lp;
  // Observer invoked whenever the incumbent improves (node index, objective).
  std::function<void(long, double)> on_incumbent;
};

// Best-bound branch and bound, deterministic: ties broken by lowest node
// index, branching on the most fractional binary (ties by lowest index).
MilpSolution solve_milp(const MilpProblem& p, const MilpOptions& opts = {});

}  // namespace ucscreen
