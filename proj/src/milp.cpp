#include "ucscreen/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

namespace ucscreen {

void MilpProblem::validate() const {
  lp.validate();
  for (int j : binary_indices) {
    if (j < 0 || j >= lp.num_vars())
      throw ValidationError("binary index out of range");
    if (lp.lower[j] < -1e-9 || lp.upper[j] > 1.0 + 1e-9)
      throw ValidationError("binary variable bounds must lie within [0,1]");
  }
}

std::string to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::NodeLimit: return "node_limit";
  }
  return "?";
}

namespace {

struct Node {
  Eigen::VectorXd lower, upper;  // variable bounds for this subproblem
  double bound;                  // parent LP relaxation value (min sense)
  long id;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // best bound first
    return a.id > b.id;                                // then FIFO
  }
};

}  // namespace

MilpSolution solve_milp(const MilpProblem& p, const MilpOptions& opts) {
  p.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const double int_tol = opts.lp.tol.integrality;

  // Work in min sense internally.
  LpProblem base = p.lp;
  const bool maximize = base.maximize;
  if (maximize) {
    base.objective = -base.objective;
    base.maximize = false;
  }

  MilpSolution out;
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  open.push(Node{base.lower, base.upper, -kInf, next_id++});

  double incumbent_obj = kInf;
  Eigen::VectorXd incumbent_x;
  bool have_incumbent = false;
  long nodes = 0;
  bool hit_limit = false;

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (have_incumbent &&
        node.bound > incumbent_obj - opts.gap * std::max(1.0, std::abs(incumbent_obj)))
      continue;  // pruned by bound
    if (nodes >= opts.node_limit) {
      hit_limit = true;
      break;
    }
    ++nodes;

    LpProblem sub = base;
    sub.lower = node.lower;
    sub.upper = node.upper;
    const LpSolution rel = solve_lp(sub, opts.lp);
    if (rel.status == LpStatus::Infeasible) continue;
    if (rel.status == LpStatus::Unbounded)
      throw ValidationError("MILP relaxation is unbounded");
    if (rel.status == LpStatus::Stalled)
      throw ValidationError("LP relaxation stalled inside branch and bound");
    if (have_incumbent &&
        rel.objective > incumbent_obj - opts.gap * std::max(1.0, std::abs(incumbent_obj)))
      continue;

    // Most fractional binary, ties by lowest index.
    int branch_var = -1;
    double best_frac = int_tol;
    for (int j : p.binary_indices) {
      const double v = rel.x[j];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        branch_var = j;
      }
    }

    if (branch_var < 0) {
      // Integral: candidate incumbent.
      if (rel.objective < incumbent_obj - 1e-12) {
        incumbent_obj = rel.objective;
        incumbent_x = rel.x;
        for (int j : p.binary_indices) incumbent_x[j] = std::round(incumbent_x[j]);
        have_incumbent = true;
        if (opts.on_incumbent)
          opts.on_incumbent(nodes, maximize ? -incumbent_obj : incumbent_obj);
      }
      continue;
    }

    Node down{node.lower, node.upper, rel.objective, next_id++};
    down.upper[branch_var] = 0.0;
    down.lower[branch_var] = std::min(down.lower[branch_var], 0.0);
    Node up{node.lower, node.upper, rel.objective, next_id++};
    up.lower[branch_var] = 1.0;
    up.upper[branch_var] = std::max(up.upper[branch_var], 1.0);
    open.push(down);
    open.push(up);
  }

  out.node_count = nodes;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.has_incumbent = have_incumbent;
  if (hit_limit) {
    out.status = MilpStatus::NodeLimit;
    if (have_incumbent) {
      out.x = incumbent_x;
      out.objective = maximize ? -incumbent_obj : incumbent_obj;
    }
    return out;
  }
  if (!have_incumbent) {
    out.status = MilpStatus::Infeasible;
    return out;
  }
  out.status = MilpStatus::Optimal;
  out.x = incumbent_x;
  out.objective = maximize ? -incumbent_obj : incumbent_obj;
  return out;
}

}  // namespace ucscreen
