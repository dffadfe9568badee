#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace ucscreen {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Central numeric tolerances. All configurable knobs surface here so the CLI
// can override them in one place.
struct Tolerances {
  double feasibility = 1e-7;   // primal feasibility residual
  double optimality = 1e-7;    // dual feasibility / reduced-cost threshold
  double active_set = 1e-6;    // |a_k.y - b_k| below which a constraint is tight
  double redundancy = 1e-6;    // screening margin scale factor
  double integrality = 1e-6;   // binary rounding in branch and bound
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a screening subproblem is infeasible, i.e. the underlying UC
// model itself has no feasible dispatch for the given forecast.
class ScreeningInfeasibleError : public std::runtime_error {
 public:
  explicit ScreeningInfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace ucscreen
