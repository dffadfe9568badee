#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ucscreen/screening.hpp"

namespace ucscreen {

// Polyhedral operating range of the varying forecast entries: {theta : H theta <= h}.
struct ParameterSet {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;

  int dim() const { return static_cast<int>(H.cols()); }
  int num_rows() const { return static_cast<int>(H.rows()); }

  // Axis-aligned box [lo, hi] per dimension.
  static ParameterSet box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  bool contains(const Eigen::VectorXd& theta, double tol = 1e-8) const;
  // Nonempty with interior (one Chebyshev LP) and bounded (2*dim LPs).
  // Returns the bounding box; throws ValidationError on violation.
  void check_valid(Eigen::VectorXd& box_lo, Eigen::VectorXd& box_hi) const;
};

// One region of the optimal partition: the parameters sharing an optimal
// active set, over which the extreme flow is affine.
struct CriticalRegion {
  std::vector<int> active_set;  // canonical inequality indices
  Eigen::MatrixXd G;            // region polyhedron, unit-norm rows
  Eigen::VectorXd g;
  Eigen::VectorXd a_hat;        // f* = a_hat . theta + b_hat
  double b_hat = 0.0;
  Eigen::VectorXd chebyshev_center;
  double chebyshev_radius = 0.0;

  bool contains(const Eigen::VectorXd& theta, double tol) const;
};

// Piecewise-affine map from the varying forecast to the extreme flow of one
// (line, direction) screening model. Immutable once built; safe to query
// concurrently.
struct AffinePolicy {
  Method method = Method::S1;
  int line = 0;
  Direction dir = Direction::Upper;
  std::vector<int> varying_buses;     // external bus ids
  Eigen::VectorXd base_load;          // full forecast the policy was built at
  ParameterSet domain;
  std::vector<CriticalRegion> regions;
  double compare_limit = 0.0;
  bool overflow = false;              // region cap hit: store partial
  int uncovered_pockets = 0;          // degenerate seeds abandoned

  // First region containing theta wins (overlap is boundary-only, where the
  // values agree). nullopt = not covered.
  std::optional<double> evaluate(const Eigen::VectorXd& theta,
                                 double tol = 1e-8) const;
};

// Screening LP in canonical parametric form:
//   optimize c.y   s.t.  G y <= w + S theta,  E y = e + T theta,
// with the reported flow f*(theta) = lp_value + obj_const + obj_theta.theta.
struct ParametricLp {
  Eigen::VectorXd c;
  bool maximize = false;
  Eigen::MatrixXd G, S;
  Eigen::VectorXd w;
  Eigen::MatrixXd E, T;
  Eigen::VectorXd e;
  double obj_const = 0.0;
  Eigen::VectorXd obj_theta;
  ParameterSet domain;

  Method method = Method::S1;
  int line = 0;
  Direction dir = Direction::Upper;
  std::vector<int> varying;  // dense bus indices
  double compare_limit = 0.0;

  int n_vars() const { return static_cast<int>(c.size()); }
  int n_ineq() const { return static_cast<int>(w.size()); }

  LpProblem instantiate(const Eigen::VectorXd& theta) const;
  double flow_value(double lp_objective, const Eigen::VectorXd& theta) const;
};

// Canonicalizes a screening template (bounds become rows, relations fold to
// <=) against a parameter set over the template's varying buses.
ParametricLp build_parametric(const ScreeningTemplate& tpl, const ParameterSet& ps);

struct MplpOptions {
  int region_cap = 10000;
  double facet_step_rel = 1e-6;   // facet-crossing step, relative to the domain extent
  double point_tol = 1e-8;        // point-location tolerance
  int degeneracy_retries = 5;
  double jitter_rel = 1e-7;       // seed perturbation, relative to the domain extent
  double full_dim_radius = 1e-9;  // regions thinner than this are discarded
  LpOptions lp;
};

// Geometric exploration: solve at an interior seed, freeze the active set,
// build the region where that basis stays optimal, then step across each
// facet to find the neighbors. Degenerate seeds are jittered a few times and
// then abandoned as uncovered pockets (the hybrid fallback makes those
// harmless).
AffinePolicy enumerate_regions(const ParametricLp& plp, const MplpOptions& opts = {});

// Convenience: template + enumeration for one bound.
AffinePolicy build_policy(const Network& net, const PtdfMatrix& ptdf,
                          const Forecast& fc, const ScreeningSpec& spec,
                          int line, Direction dir, const std::vector<int>& varying,
                          const ParameterSet& ps, const MplpOptions& opts = {});

std::optional<double> evaluate_policy(const AffinePolicy& pol,
                                      const Eigen::VectorXd& theta,
                                      double tol = 1e-8);

// Policies for every finite-limit (line, direction); parallel over bounds.
struct PolicyStore {
  std::string schema = "mplp-policy/1";
  ScreeningSpec spec;
  std::vector<int> varying_buses;  // external ids
  std::vector<AffinePolicy> policies;

  const AffinePolicy* find(int line, Direction dir) const;
  bool any_overflow() const;
};

PolicyStore build_policy_store(const Network& net, const PtdfMatrix& ptdf,
                               const Forecast& fc, const ScreeningSpec& spec,
                               const std::vector<int>& varying_dense,
                               const ParameterSet& ps, const MplpOptions& opts = {},
                               int threads = 0);

std::string store_to_json(const PolicyStore& store);
PolicyStore store_from_json(const std::string& text);

// Evaluate the policy where the query is covered, fall back to the direct
// screening LP elsewhere; classifications match all-LP screening on covered
// points. Source tags record which path produced each bound.
ScreeningResult hybrid_screen(const PolicyStore& store, const Network& net,
                              const PtdfMatrix& ptdf, const Forecast& fc,
                              const ScreeningOptions& opts = {},
                              bool allow_lp_fallback = true);

}  // namespace ucscreen
