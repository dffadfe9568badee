// Test-only reference implementations, kept independent of the solver path
// they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "ucscreen/lp.hpp"
#include "ucscreen/milp.hpp"
#include "ucscreen/network.hpp"
#include "ucscreen/uncertainty.hpp"

namespace ucscreen::testing {

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

// Brute-force LP oracle by vertex enumeration: every n-subset of the pooled
// rows (constraints + finite bounds) is solved as a square system and the
// best feasible vertex wins. Valid for bounded feasible regions.
inline OracleResult lp_oracle(const LpProblem& p, double feas_tol = 1e-7) {
  const int n = p.num_vars();
  // Pool rows: Ax (=|<=|>=) b plus finite bounds as rows.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  std::vector<Relation> rel;
  for (int k = 0; k < p.num_constraints(); ++k) {
    rows.push_back(p.A.row(k).transpose());
    rhs.push_back(p.rhs[k]);
    rel.push_back(p.relations[k]);
  }
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = 1.0;
    if (std::isfinite(p.lower[j])) {
      rows.push_back(e);
      rhs.push_back(p.lower[j]);
      rel.push_back(Relation::GreaterEqual);
    }
    if (std::isfinite(p.upper[j])) {
      rows.push_back(e);
      rhs.push_back(p.upper[j]);
      rel.push_back(Relation::LessEqual);
    }
  }
  const int m = static_cast<int>(rows.size());

  auto feasible_point = [&](const Eigen::VectorXd& x) {
    for (int k = 0; k < m; ++k) {
      const double v = rows[k].dot(x) - rhs[k];
      const double scale = std::max(1.0, std::abs(rhs[k]));
      if (rel[k] == Relation::Equal && std::abs(v) > feas_tol * scale) return false;
      if (rel[k] == Relation::LessEqual && v > feas_tol * scale) return false;
      if (rel[k] == Relation::GreaterEqual && v < -feas_tol * scale) return false;
    }
    return true;
  };

  OracleResult best;
  const double sign = p.maximize ? -1.0 : 1.0;
  double best_val = kInf;

  std::vector<int> pick(n);
  // Iterate all C(m, n) subsets with a manual odometer.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  if (m < n) return best;
  while (true) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = rows[idx[i]].transpose();
      b[i] = rhs[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(b);
      if (x.allFinite() && feasible_point(x)) {
        const double v = sign * p.objective.dot(x);
        if (v < best_val - 1e-12) {
          best_val = v;
          best.feasible = true;
          best.x = x;
        }
      }
    }
    // next combination
    int i = n - 1;
    while (i >= 0 && idx[i] == m - n + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int k = i + 1; k < n; ++k) idx[k] = idx[k - 1] + 1;
  }
  if (best.feasible) best.objective = p.maximize ? -best_val : best_val;
  return best;
}

// Exhaustive MILP oracle: fixes every 0/1 pattern of the binaries and takes
// the best LP. The LP itself is solved by the vertex-enumeration oracle, so
// the reference stays independent of the simplex implementation.
inline OracleResult milp_oracle(const MilpProblem& p) {
  const int k = static_cast<int>(p.binary_indices.size());
  OracleResult best;
  double best_val = kInf;
  const double sign = p.lp.maximize ? -1.0 : 1.0;
  for (long mask = 0; mask < (1L << k); ++mask) {
    LpProblem sub = p.lp;
    for (int i = 0; i < k; ++i) {
      const int j = p.binary_indices[i];
      const double v = (mask >> i) & 1 ? 1.0 : 0.0;
      if (v < sub.lower[j] - 1e-12 || v > sub.upper[j] + 1e-12) {
        sub.lower[j] = 1.0;
        sub.upper[j] = 0.0;  // marks pattern infeasible
        break;
      }
      sub.lower[j] = v;
      sub.upper[j] = v;
    }
    bool pattern_ok = true;
    for (int j = 0; j < sub.num_vars(); ++j)
      if (sub.lower[j] > sub.upper[j]) pattern_ok = false;
    if (!pattern_ok) continue;
    const OracleResult r = lp_oracle(sub);
    if (r.feasible) {
      const double vv = sign * p.lp.objective.dot(r.x);
      if (vv < best_val - 1e-12) {
        best_val = vv;
        best.feasible = true;
        best.x = r.x;
      }
    }
  }
  if (best.feasible) best.objective = p.lp.maximize ? -best_val : best_val;
  return best;
}

// Deterministic random LP with a bounded feasible region (box bounds on all
// variables plus a handful of random rows).
inline LpProblem random_lp(Rng& rng, int max_vars = 6, int max_rows = 10) {
  const int n = 1 + static_cast<int>(rng.uniform(0.0, max_vars));
  const int m = 1 + static_cast<int>(rng.uniform(0.0, max_rows));
  LpProblem p = LpProblem::with_sizes(n, m);
  for (int j = 0; j < n; ++j) {
    p.objective[j] = rng.uniform(-5.0, 5.0);
    p.lower[j] = rng.uniform(-10.0, 0.0);
    p.upper[j] = p.lower[j] + rng.uniform(0.5, 15.0);
  }
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < n; ++j)
      p.A(k, j) = rng.uniform() < 0.35 ? 0.0 : rng.uniform(-3.0, 3.0);
    const double roll = rng.uniform();
    p.relations[k] = roll < 0.75 ? Relation::LessEqual
                                 : (roll < 0.9 ? Relation::GreaterEqual : Relation::Equal);
    p.rhs[k] = rng.uniform(-8.0, 8.0);
  }
  p.maximize = rng.uniform() < 0.3;
  return p;
}

// Small random connected network with one generator per bus and optionally
// tight line limits.
inline Network random_network(Rng& rng, int max_buses = 8, bool tight_limits = false) {
  Network net;
  const int n = 2 + static_cast<int>(rng.uniform(0.0, max_buses - 2));
  for (int i = 0; i < n; ++i) net.buses.push_back(i + 1);
  net.reference_bus = 1 + static_cast<int>(rng.uniform(0.0, n));
  // Random spanning tree, then extra chords.
  for (int i = 1; i < n; ++i) {
    const int parent = static_cast<int>(rng.uniform(0.0, i));
    Branch br;
    br.from_bus = net.buses[parent];
    br.to_bus = net.buses[i];
    br.reactance = rng.uniform(0.05, 0.4);
    br.limit = tight_limits ? rng.uniform(40.0, 160.0) : rng.uniform(150.0, 800.0);
    net.branches.push_back(br);
  }
  const int extra = static_cast<int>(rng.uniform(0.0, n - 1));
  for (int e = 0; e < extra; ++e) {
    const int a = static_cast<int>(rng.uniform(0.0, n));
    const int b = static_cast<int>(rng.uniform(0.0, n));
    if (a == b) continue;
    Branch br;
    br.from_bus = net.buses[a];
    br.to_bus = net.buses[b];
    br.reactance = rng.uniform(0.05, 0.4);
    br.limit = tight_limits ? rng.uniform(40.0, 160.0) : rng.uniform(150.0, 800.0);
    net.branches.push_back(br);
  }
  for (int i = 0; i < n; ++i) {
    Generator g;
    g.bus = net.buses[i];
    const bool has_gen = rng.uniform() < 0.7 || i == 0;
    g.pmin = 0.0;
    g.pmax = has_gen ? rng.uniform(50.0, 300.0) : 0.0;
    g.cost = rng.uniform(5.0, 40.0);
    g.participates = has_gen;
    net.generators.push_back(g);
  }
  net.validate();
  return net;
}

// Load vector sized to keep the instance feasible (total below capacity).
inline Forecast random_forecast(Rng& rng, const Network& net) {
  double cap = 0.0;
  for (const Generator& g : net.generators) cap += g.pmax;
  Forecast fc;
  fc.load.setZero(net.num_buses());
  const double total = cap * rng.uniform(0.3, 0.7);
  Eigen::VectorXd weights(net.num_buses());
  for (int i = 0; i < net.num_buses(); ++i) weights[i] = rng.uniform(0.05, 1.0);
  fc.load = weights / weights.sum() * total;
  return fc;
}

// The canonical 3-bus triangle: lines (1,2), (2,3), (1,3), reactance 0.1,
// reference bus 3.
inline Network triangle_network(double limit12 = 1000.0, double limit23 = 1000.0,
                                double limit13 = 1000.0) {
  Network net;
  net.buses = {1, 2, 3};
  net.reference_bus = 3;
  net.branches = {{1, 2, 0.1, limit12}, {2, 3, 0.1, limit23}, {1, 3, 0.1, limit13}};
  net.generators = {{1, 0.0, 200.0, 10.0, true}, {2, 0.0, 100.0, 20.0, true}};
  ensure_generator_per_bus(net);
  net.validate();
  return net;
}

}  // namespace ucscreen::testing
