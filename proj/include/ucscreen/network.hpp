#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ucscreen/common.hpp"

namespace ucscreen {

// A transmission line. `limit` is the MW flow bound in both directions;
// an unlimited line (MATPOWER rateA = 0) carries limit = kInf, never a
// large magic number, so screening can short-circuit it.
struct Branch {
  int from_bus = 0;  // external bus id
  int to_bus = 0;
  double reactance = 0.0;  // p.u., > 0
  double limit = kInf;     // MW, > 0 or kInf
};

struct Generator {
  int bus = 0;        // external bus id
  double pmin = 0.0;  // MW
  double pmax = 0.0;  // MW
  double cost = 1.0;  // $/MWh, linear
  bool participates = true;  // takes part in recourse balancing
};

// Static description of the power system. Buses are identified externally by
// integer ids; all matrix-facing code uses the dense index of `buses`.
// Every bus carries at least one generator: buses without one in the source
// data get a synthesized zero-capacity generator so each bus has a
// generation variable.
struct Network {
  std::vector<int> buses;  // external ids, defines dense bus order
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  double base_mva = 100.0;
  int reference_bus = 0;  // external id

  int bus_index(int external_id) const;  // -1 if unknown
  int reference_index() const { return bus_index(reference_bus); }
  int num_buses() const { return static_cast<int>(buses.size()); }
  int num_lines() const { return static_cast<int>(branches.size()); }
  int num_gens() const { return static_cast<int>(generators.size()); }

  // Checks all structural invariants (ids resolve, positive reactances and
  // limits, pmin <= pmax, connected branch graph, exactly one generator
  // synthesized per bare bus). Throws ValidationError.
  void validate() const;

  bool is_connected() const;
};

// Synthesizes a zero-capacity, non-participating generator on every bus that
// has none, so the models always see one generation variable per bus.
void ensure_generator_per_bus(Network& net);

// Line x bus injection-shift factors. ptdf(j, i) is the flow induced on line
// j by 1 MW injected at bus i and withdrawn at the reference bus. The
// reference column is identically zero.
struct PtdfMatrix {
  Eigen::MatrixXd factors;  // n_lines x n_buses
  int reference_index = 0;

  double operator()(int line, int bus) const { return factors(line, bus); }
  int num_lines() const { return static_cast<int>(factors.rows()); }
  int num_buses() const { return static_cast<int>(factors.cols()); }
};

// Dense PTDF via reduced susceptance-matrix solve. Requires a connected
// network; throws ValidationError on a singular reduced matrix.
PtdfMatrix compute_ptdf(const Network& net);

// Nodal net injections -> line flows through the DC angle equations
// (solve B theta = p, flow = delta theta / x). Used as the independent check
// of the PTDF rows; injections must sum to zero.
Eigen::VectorXd angle_flows(const Network& net, const Eigen::VectorXd& injections);

}  // namespace ucscreen
