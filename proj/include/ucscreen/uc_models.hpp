#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ucscreen/milp.hpp"
#include "ucscreen/network.hpp"
#include "ucscreen/uncertainty.hpp"

namespace ucscreen {

enum class Direction : int { Upper = 0, Lower = 1 };

inline const char* to_string(Direction d) {
  return d == Direction::Upper ? "upper" : "lower";
}

struct LineBound {
  int line = 0;
  Direction dir = Direction::Upper;
  friend bool operator==(const LineBound&, const LineBound&) = default;
};

// Which (line, direction) flow limits a model retains. The full set builds
// M1/M2/M3; a screened set builds the reduced models T1-T5.
class BoundSet {
 public:
  BoundSet() = default;
  explicit BoundSet(int n_lines) : mask_(2 * n_lines, 0) {}

  static BoundSet all(int n_lines) {
    BoundSet s(n_lines);
    std::fill(s.mask_.begin(), s.mask_.end(), 1);
    return s;
  }
  static BoundSet none(int n_lines) { return BoundSet(n_lines); }

  int num_lines() const { return static_cast<int>(mask_.size() / 2); }
  bool contains(int line, Direction d) const { return mask_[slot(line, d)] != 0; }
  void insert(int line, Direction d) { mask_[slot(line, d)] = 1; }
  void erase(int line, Direction d) { mask_[slot(line, d)] = 0; }
  int count() const;
  std::vector<LineBound> to_list() const;

 private:
  int slot(int line, Direction d) const { return 2 * line + static_cast<int>(d); }
  std::vector<std::uint8_t> mask_;
};

// A built UC MILP plus the variable layout needed to read solutions back.
struct UcModel {
  MilpProblem problem;
  int n_gens = 0;
  int u_offset = 0;
  int x_offset = 0;
  int r_offset = -1;  // reserves (chance-constrained model only)
  int t_offset = -1;  // worst-case cost epigraph (robust model only)
  // Flow-limit rows present in the model, for diagnostics and feasibility audits.
  std::vector<std::pair<int, LineBound>> flow_rows;
};

struct UcSolution {
  MilpStatus status = MilpStatus::Infeasible;
  Eigen::VectorXd u;  // per generator, integral
  Eigen::VectorXd x;  // per generator, MW
  Eigen::VectorXd r;  // per generator, MW (empty unless CC)
  double objective = 0.0;
  long node_count = 0;
  double wall_seconds = 0.0;
};

UcSolution solve_uc(const UcModel& model, const MilpOptions& opts = {});

// Uniform participation factors (1/|G| on participating generators with
// nonzero capacity, 0 elsewhere).
Eigen::VectorXd participation_factors(const Network& net);

// Single-period deterministic UC in PTDF form: min c.x over binary u with
// generation bounds, system balance, and the flow limits listed in `keep`.
UcModel build_deterministic_uc(const Network& net, const PtdfMatrix& ptdf,
                               const Forecast& fc, const BoundSet& keep);

// Deterministic equivalent of the chance-constrained UC: reserve variables r
// with quantile floors, generation bounds shrunk by r, and flow limits
// tightened by the quantile of each line's flow deviation. Throws
// ValidationError when a kept line's tightened limit is negative.
UcModel build_cc_uc(const Network& net, const PtdfMatrix& ptdf, const Forecast& fc,
                    const GaussianUncertainty& unc, const BoundSet& keep);

struct RobustScenarioModel {
  UcModel model;
  // Realized per-bus demand of each box vertex, in scenario order.
  std::vector<Eigen::VectorXd> realizations;
};

struct RobustOptions {
  int max_uncertain_nodes = 12;  // refuse 2^K blow-up beyond this
};

// Robust UC over the box set by explicit vertex enumeration: one shared
// (u, x) pair, per-vertex recourse-adjusted constraints, and a worst-case
// cost epigraph. Exact for box uncertainty with affine recourse since the
// worst case of a linear function over a polytope sits at a vertex.
RobustScenarioModel build_robust_uc_scenarios(const Network& net,
                                              const PtdfMatrix& ptdf,
                                              const Forecast& fc,
                                              const BoxUncertainty& unc,
                                              const BoundSet& keep,
                                              const RobustOptions& opts = {});

// Post-realization dispatch adjustment: distributes the total mismatch
// between realized demand and scheduled generation over the participation
// factors, so the output balances realized demand exactly.
Eigen::VectorXd apply_recourse(const Eigen::VectorXd& dispatch,
                               const Eigen::VectorXd& alpha,
                               const Eigen::VectorXd& realized_load);

// Line flows for a dispatch (per generator) against a load (per bus).
Eigen::VectorXd line_flows(const Network& net, const PtdfMatrix& ptdf,
                           const Eigen::VectorXd& dispatch,
                           const Eigen::VectorXd& load);

}  // namespace ucscreen
