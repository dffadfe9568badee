#pragma once

#include <string>
#include <vector>

#include "ucscreen/mplp.hpp"
#include "ucscreen/screening.hpp"

namespace ucscreen {

// Assignment of every bus to exactly one area. Line sets are derived: a line
// is internal to the area holding both endpoints; lines crossing areas are
// tie-lines and belong to no per-area line set.
struct AreaPartition {
  std::vector<int> area_of_bus;  // dense bus index -> area in [0, n_areas)
  int n_areas = 1;

  static AreaPartition single(const Network& net);
  // {"areas": {"<bus-id>": <area-index>, ...}}; indices are normalized to a
  // dense 0-based range in sorted order of the given labels.
  static AreaPartition from_json(const std::string& text, const Network& net);

  void validate(const Network& net) const;  // total, connected areas
  bool is_internal(const Network& net, int line) const;
  int line_area(const Network& net, int line) const;  // -1 for tie-lines
  std::vector<int> internal_lines(const Network& net, int area) const;
  std::vector<int> tie_lines(const Network& net) const;
};

// Angle-formulation UC: voltage angles per bus, one flow variable per
// in-area line, nodal balance over each bus's area line set, reference angle
// pinned. Tie-lines carry no variables, matching the decomposable model the
// per-area screens relax; with a single area this is the standard DC UC and
// its optimum matches the PTDF form.
struct AngleUcModel {
  MilpProblem problem;
  int n_gens = 0;
  int u_offset = 0;
  int x_offset = 0;
  int delta_offset = 0;
  int flow_offset = 0;
  std::vector<int> model_lines;  // network line index per flow variable
};

AngleUcModel build_angle_uc(const Network& net, const Forecast& fc,
                            const AreaPartition& part, const BoundSet& keep);
inline AngleUcModel build_angle_uc(const Network& net, const Forecast& fc,
                                   const AreaPartition& part) {
  return build_angle_uc(net, fc, part, BoundSet::all(net.num_lines()));
}

// Angle-formulation screening LP covering all areas, relaxed commitment,
// target limit dropped. A tie-line target gets a flow variable tied to its
// endpoint angles; with decoupled areas that value is typically unbounded
// and the bound conservatively classifies non-redundant.
ScreeningTemplate make_whole_angle_template(const Network& net, const Forecast& fc,
                                            const AreaPartition& part, int line,
                                            Direction dir,
                                            const std::vector<int>& varying = {});

// Area-local screening LP: only area-g generators, angles, and internal
// lines; boundary-bus balance omits tie-line terms; the reference constraint
// appears only when the reference bus lies in g. A constraint subset of the
// whole model, hence a relaxation.
ScreeningTemplate make_area_template(const Network& net, const Forecast& fc,
                                     const AreaPartition& part, int area, int line,
                                     Direction dir,
                                     const std::vector<int>& varying = {});

BoundRecord screen_whole_angle(const Network& net, const Forecast& fc,
                               const AreaPartition& part, int line, Direction dir,
                               const ScreeningOptions& opts = {});

BoundRecord screen_area(const Network& net, const Forecast& fc,
                        const AreaPartition& part, int area, int line, Direction dir,
                        const ScreeningOptions& opts = {});

// Per-area screening of internal lines (parallel over bounds) plus
// whole-model screening of tie-lines; the union of non-redundant bounds is
// returned as one result.
ScreeningResult union_screen(const Network& net, const Forecast& fc,
                             const AreaPartition& part,
                             const ScreeningOptions& opts = {});

// Whole-model screening of every bound, for comparison with union_screen.
ScreeningResult whole_screen(const Network& net, const Forecast& fc,
                             const AreaPartition& part,
                             const ScreeningOptions& opts = {});

// MPLP policies for the internal lines of one area, parameterized by the
// area-local forecast on `varying_dense` (must lie inside the area).
PolicyStore area_policy(const Network& net, const Forecast& fc,
                        const AreaPartition& part, int area,
                        const std::vector<int>& varying_dense,
                        const ParameterSet& ps, const MplpOptions& opts = {},
                        int threads = 0);

}  // namespace ucscreen
