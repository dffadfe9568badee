#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ucscreen/mplp.hpp"
#include "ucscreen/screening.hpp"

namespace ucscreen {

enum class ReducedFamily { T1, T2, T3, T4, T5 };

const char* to_string(ReducedFamily f);
ReducedFamily family_from_string(const std::string& s);

// Draws realized per-bus demands. Gaussian: l = forecast - omega with
// omega ~ N(0, sigma2) per bus. Box: uniform between the box corners on
// uncertain nodes, forecast elsewhere. Bit-identical for a fixed seed.
std::vector<Eigen::VectorXd> sample_realizations(const UncertaintyModel& unc,
                                                 const Forecast& fc, int n,
                                                 std::uint64_t seed);

struct ValidationOptions {
  double feasibility_tol = 1e-6;  // MW, absolute residual
  MilpOptions milp;
  int threads = 0;
};

struct ValidationReport {
  std::string family;
  int n_samples = 0;
  int n_infeasible = 0;       // solution violates a removed original constraint
  int n_full_infeasible = 0;  // original model itself infeasible (excluded)
  double infeasibility_rate = 0.0;  // over usable samples
  double mean_gap = 0.0;            // relative, over feasible samples
  double max_gap = 0.0;
  int n_gap_samples = 0;
  std::uint64_t seed = 0;
  int kept_bounds = 0;
  double mean_reduced_solve_seconds = 0.0;
  double mean_full_solve_seconds = 0.0;
  std::string config_echo;  // JSON snippet reproducing the run
};

// Monte-Carlo validation of a reduced model against the full deterministic
// UC. T1-T3 re-solve the reduced model per realization; T4 solves the
// reduced chance-constrained model once and applies the recourse policy; T5
// does the same with the reduced robust model. Feasibility is judged against
// every original constraint, including the screened-out ones.
ValidationReport validate_reduced(ReducedFamily family, const Network& net,
                                  const PtdfMatrix& ptdf, const Forecast& fc,
                                  const UncertaintyModel& unc, const BoundSet& keep,
                                  const std::vector<Eigen::VectorXd>& realizations,
                                  std::uint64_t seed,
                                  const ValidationOptions& opts = {});

// Is (u, x) feasible for the full deterministic UC at `load`? Returns the
// first violated constraint description, empty when feasible.
std::string check_deterministic_feasibility(const Network& net, const PtdfMatrix& ptdf,
                                            const Eigen::VectorXd& u,
                                            const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& load, double tol);

struct TimingMismatch {
  int line;
  Direction dir;
  bool lp_redundant;
  bool hybrid_redundant;
};

struct TimingTable {
  bool classifications_match = false;
  std::vector<TimingMismatch> mismatches;
  int n_forecasts = 0;
  int n_bounds = 0;           // solved bounds per forecast (sentinels excluded)
  double lp_total_seconds = 0.0;
  double hybrid_total_seconds = 0.0;
  double policy_eval_seconds = 0.0;   // pure point-location + law evaluation
  double mean_lp_per_bound = 0.0;
  double mean_policy_per_bound = 0.0;
  double speedup = 0.0;               // lp / policy, per bound
  int policy_hits = 0;
  int lp_fallbacks = 0;
};

// Times all-LP screening against hybrid policy screening over a forecast
// list. Classifications are compared first; on mismatch the table carries
// the offending bounds and no timing claims.
TimingTable timing_compare(const PolicyStore& store, const Network& net,
                           const PtdfMatrix& ptdf,
                           const std::vector<Forecast>& forecasts,
                           const ScreeningOptions& opts = {});

std::string report_to_json(const ValidationReport& r);
std::string report_to_csv(const ValidationReport& r);
std::string timing_to_json(const TimingTable& t);

}  // namespace ucscreen
