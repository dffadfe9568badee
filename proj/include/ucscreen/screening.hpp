#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ucscreen/uc_models.hpp"

namespace ucscreen {

enum class Method { S1, S2, S3 };  // deterministic, chance-constrained, robust

inline const char* to_string(Method m) {
  switch (m) {
    case Method::S1: return "S1";
    case Method::S2: return "S2";
    case Method::S3: return "S3";
  }
  return "?";
}

enum class SolveSource { Lp, Policy, Sentinel };

inline const char* to_string(SolveSource s) {
  switch (s) {
    case SolveSource::Lp: return "LP";
    case SolveSource::Policy: return "AffinePolicy";
    case SolveSource::Sentinel: return "sentinel";
  }
  return "?";
}

// Verdict for one line-limit bound. `f_star` is the extreme achievable flow
// in the screened polytope (NaN when never solved), `margin` the headroom
// of the compared limit over |f_star| (+inf for unlimited lines).
struct BoundRecord {
  int line = 0;
  Direction dir = Direction::Upper;
  bool redundant = false;
  double f_star = 0.0;
  double margin = 0.0;
  Method method = Method::S1;
  SolveSource source = SolveSource::Lp;
  std::string note;
};

struct ScreeningResult {
  Method method = Method::S1;
  std::vector<BoundRecord> records;  // 2 per line: (0,U),(0,L),(1,U),...

  const BoundRecord& at(int line, Direction d) const;
  int non_redundant_count() const;
  void validate(int n_lines) const;  // exactly two records per line
};

// keep set = every bound marked non-redundant.
BoundSet reduce_model(const ScreeningResult& sr);

// Which screening model to assemble.
struct ScreeningSpec {
  Method method = Method::S1;
  std::optional<BoxUncertainty> box;     // required for S3
  bool with_recourse = false;            // S3: couple dispatch to the mismatch
  std::optional<GaussianUncertainty> gauss;  // required for S2

  void validate(const Network& net) const;
};

// One max/min-flow LP with the forecast's affine influence factored out, so
// the same object backs both direct solving and the parametric machinery.
// The LP optimizes the flow expression in decision variables; the true flow
// adds the forecast-dependent offset:
//   f*(theta) = lp_optimum(theta) + obj_base + obj_sens.(theta - theta_base)
// and the LP rhs moves as rhs_base + rhs_sens.(theta - theta_base).
struct ScreeningTemplate {
  LpProblem lp;                // instantiated at the base forecast
  Eigen::MatrixXd rhs_sens;    // m x |varying|
  Eigen::VectorXd theta_base;  // base forecast on the varying buses
  double obj_base = 0.0;
  Eigen::VectorXd obj_sens;    // |varying|
  std::vector<int> varying;    // dense bus indices
  int line = 0;
  Direction dir = Direction::Upper;
  Method method = Method::S1;
  double compare_limit = 0.0;  // tightened limit for S2, plain limit otherwise
  std::string note;

  LpProblem instantiate(const Eigen::VectorXd& theta) const;
  double flow_value(double lp_objective, const Eigen::VectorXd& theta) const;
};

// Assembles the screening LP for one (line, direction) with the listed buses
// treated as varying parameters (empty for plain screening).
ScreeningTemplate make_screening_template(const Network& net, const PtdfMatrix& ptdf,
                                          const Forecast& fc, const ScreeningSpec& spec,
                                          int line, Direction dir,
                                          const std::vector<int>& varying = {});

struct ScreeningOptions {
  Tolerances tol;
  int threads = 0;  // 0 -> hardware default, 1 -> serial
  LpOptions lp;
};

// Full sweep over every (line, direction); subproblems run on a
// deterministic parallel map. Throws ScreeningInfeasibleError when a
// subproblem is infeasible (the UC itself has no dispatch at this forecast).
ScreeningResult run_screening(const Network& net, const PtdfMatrix& ptdf,
                              const Forecast& fc, const ScreeningSpec& spec,
                              const ScreeningOptions& opts = {});

ScreeningResult screen_deterministic(const Network& net, const PtdfMatrix& ptdf,
                                     const Forecast& fc,
                                     const ScreeningOptions& opts = {});

ScreeningResult screen_robust(const Network& net, const PtdfMatrix& ptdf,
                              const Forecast& fc, const BoxUncertainty& unc,
                              bool with_recourse = false,
                              const ScreeningOptions& opts = {});

ScreeningResult screen_cc(const Network& net, const PtdfMatrix& ptdf,
                          const Forecast& fc, const GaussianUncertainty& unc,
                          const ScreeningOptions& opts = {});

// CSV columns: line, direction, method, classification, f_star, margin, source.
// Numbers print with 9 significant digits; non-finite values print as
// inf/-inf/nan in CSV and null in JSON.
std::string to_csv(const ScreeningResult& sr);
std::string to_json_string(const ScreeningResult& sr);

}  // namespace ucscreen
