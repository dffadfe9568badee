#include "ucscreen/multi_area.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ucscreen/parallel.hpp"

namespace ucscreen {

AreaPartition AreaPartition::single(const Network& net) {
  AreaPartition p;
  p.area_of_bus.assign(net.num_buses(), 0);
  p.n_areas = 1;
  return p;
}

AreaPartition AreaPartition::from_json(const std::string& text, const Network& net) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid partition JSON: ") + e.what());
  }
  if (!doc.contains("areas") || !doc["areas"].is_object())
    throw ParseError("partition file needs an \"areas\" object");

  std::map<int, int> raw;  // bus id -> raw label
  std::set<int> labels;
  for (const auto& [key, value] : doc["areas"].items()) {
    int bus_id;
    try {
      bus_id = std::stoi(key);
    } catch (const std::exception&) {
      throw ParseError("partition bus id is not an integer: " + key);
    }
    if (!value.is_number_integer())
      throw ParseError("partition area index must be an integer for bus " + key);
    raw[bus_id] = value.get<int>();
    labels.insert(value.get<int>());
  }
  std::map<int, int> label_to_dense;
  int next = 0;
  for (int l : labels) label_to_dense[l] = next++;

  AreaPartition p;
  p.n_areas = next;
  p.area_of_bus.assign(net.num_buses(), -1);
  for (const auto& [bus_id, label] : raw) {
    const int idx = net.bus_index(bus_id);
    if (idx < 0)
      throw ParseError("partition references unknown bus " + std::to_string(bus_id));
    p.area_of_bus[idx] = label_to_dense[label];
  }
  for (int b = 0; b < net.num_buses(); ++b)
    if (p.area_of_bus[b] < 0)
      throw ParseError("partition does not cover bus " +
                       std::to_string(net.buses[b]));
  p.validate(net);
  return p;
}

void AreaPartition::validate(const Network& net) const {
  if (static_cast<int>(area_of_bus.size()) != net.num_buses())
    throw ValidationError("partition must assign every bus");
  for (int a : area_of_bus)
    if (a < 0 || a >= n_areas) throw ValidationError("area index out of range");
  // Each area's internal graph must be connected.
  for (int g = 0; g < n_areas; ++g) {
    std::vector<int> members;
    for (int b = 0; b < net.num_buses(); ++b)
      if (area_of_bus[b] == g) members.push_back(b);
    if (members.empty()) throw ValidationError("area " + std::to_string(g) + " is empty");
    std::map<int, std::vector<int>> adj;
    for (const Branch& br : net.branches) {
      const int f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
      if (area_of_bus[f] == g && area_of_bus[t] == g) {
        adj[f].push_back(t);
        adj[t].push_back(f);
      }
    }
    std::set<int> seen{members[0]};
    std::vector<int> stack{members[0]};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (seen.insert(w).second) stack.push_back(w);
    }
    if (seen.size() != members.size())
      throw ValidationError("area " + std::to_string(g) +
                            " has a disconnected internal graph");
  }
}

bool AreaPartition::is_internal(const Network& net, int line) const {
  return line_area(net, line) >= 0;
}

int AreaPartition::line_area(const Network& net, int line) const {
  const Branch& br = net.branches[line];
  const int a = area_of_bus[net.bus_index(br.from_bus)];
  const int b = area_of_bus[net.bus_index(br.to_bus)];
  return a == b ? a : -1;
}

std::vector<int> AreaPartition::internal_lines(const Network& net, int area) const {
  std::vector<int> out;
  for (int j = 0; j < net.num_lines(); ++j)
    if (line_area(net, j) == area) out.push_back(j);
  return out;
}

std::vector<int> AreaPartition::tie_lines(const Network& net) const {
  std::vector<int> out;
  for (int j = 0; j < net.num_lines(); ++j)
    if (line_area(net, j) < 0) out.push_back(j);
  return out;
}

namespace {

int line_orientation(const Network& net, int line, int bus) {
  const Branch& br = net.branches[line];
  if (net.bus_index(br.from_bus) == bus) return +1;
  if (net.bus_index(br.to_bus) == bus) return -1;
  return 0;
}

}  // namespace

AngleUcModel build_angle_uc(const Network& net, const Forecast& fc,
                            const AreaPartition& part, const BoundSet& keep) {
  fc.validate(net);
  part.validate(net);
  const int ng = net.num_gens();
  const int nb = net.num_buses();

  std::vector<int> model_lines;
  for (int j = 0; j < net.num_lines(); ++j)
    if (part.is_internal(net, j)) model_lines.push_back(j);
  const int nl = static_cast<int>(model_lines.size());

  AngleUcModel model;
  model.n_gens = ng;
  model.u_offset = 0;
  model.x_offset = ng;
  model.delta_offset = 2 * ng;
  model.flow_offset = 2 * ng + nb;
  model.model_lines = model_lines;

  const int n_vars = 2 * ng + nb + nl;
  const int n_rows = 2 * ng + nl + nb;
  LpProblem& lp = model.problem.lp;
  lp = LpProblem::with_sizes(n_vars, n_rows);

  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    lp.lower[g] = 0.0;
    lp.upper[g] = 1.0;
    model.problem.binary_indices.push_back(g);
    lp.lower[ng + g] = std::min(0.0, gen.pmin);
    lp.upper[ng + g] = std::max(0.0, gen.pmax);
    lp.objective[ng + g] = gen.cost;
    // x_g <= pmax u_g ; x_g >= pmin u_g
    lp.A(2 * g, ng + g) = 1.0;
    lp.A(2 * g, g) = -gen.pmax;
    lp.relations[2 * g] = Relation::LessEqual;
    lp.A(2 * g + 1, ng + g) = 1.0;
    lp.A(2 * g + 1, g) = -gen.pmin;
    lp.relations[2 * g + 1] = Relation::GreaterEqual;
  }

  // Reference angle pinned; other angles free.
  const int ref = net.reference_index();
  for (int b = 0; b < nb; ++b) {
    lp.lower[model.delta_offset + b] = b == ref ? 0.0 : -kInf;
    lp.upper[model.delta_offset + b] = b == ref ? 0.0 : kInf;
  }

  // Flow definitions and kept limits as variable bounds.
  int row = 2 * ng;
  for (int i = 0; i < nl; ++i) {
    const int j = model_lines[i];
    const Branch& br = net.branches[j];
    const int f = net.bus_index(br.from_bus), t = net.bus_index(br.to_bus);
    lp.A(row, model.flow_offset + i) = 1.0;
    lp.A(row, model.delta_offset + f) = -1.0 / br.reactance;
    lp.A(row, model.delta_offset + t) = 1.0 / br.reactance;
    lp.relations[row] = Relation::Equal;
    ++row;
    const double lim = br.limit;
    lp.upper[model.flow_offset + i] =
        (keep.contains(j, Direction::Upper) && std::isfinite(lim)) ? lim : kInf;
    lp.lower[model.flow_offset + i] =
        (keep.contains(j, Direction::Lower) && std::isfinite(lim)) ? -lim : -kInf;
  }

  // Nodal balance over each bus's area-internal lines.
  for (int b = 0; b < nb; ++b) {
    for (int g = 0; g < ng; ++g)
      if (net.bus_index(net.generators[g].bus) == b) lp.A(row, ng + g) = 1.0;
    for (int i = 0; i < nl; ++i) {
      const int orient = line_orientation(net, model_lines[i], b);
      if (orient != 0) lp.A(row, model.flow_offset + i) = -orient;
    }
    lp.relations[row] = Relation::Equal;
    lp.rhs[row] = fc.load[b];
    ++row;
  }
  return model;
}

namespace {

// Shared builder for the whole/area angle screening templates. `area < 0`
// builds the whole model.
ScreeningTemplate make_angle_template(const Network& net, const Forecast& fc,
                                      const AreaPartition& part, int area, int line,
                                      Direction dir, const std::vector<int>& varying) {
  fc.validate(net);
  part.validate(net);
  if (line < 0 || line >= net.num_lines())
    throw ValidationError("screening target line out of range");
  const bool whole = area < 0;
  if (!whole) {
    if (area >= part.n_areas) throw ValidationError("area index out of range");
    if (part.line_area(net, line) != area)
      throw ValidationError("target line is not internal to the area");
  }

  // Member buses/generators/lines of the submodel.
  std::vector<int> buses, gens, lines;
  for (int b = 0; b < net.num_buses(); ++b)
    if (whole || part.area_of_bus[b] == area) buses.push_back(b);
  for (int g = 0; g < net.num_gens(); ++g) {
    const int b = net.bus_index(net.generators[g].bus);
    if (whole || part.area_of_bus[b] == area) gens.push_back(g);
  }
  for (int j = 0; j < net.num_lines(); ++j) {
    if (part.is_internal(net, j) && (whole || part.line_area(net, j) == area))
      lines.push_back(j);
  }
  // A tie-line target is only reachable in the whole model; it gets its own
  // flow variable below.
  const bool tie_target = !part.is_internal(net, line);
  if (tie_target && !whole)
    throw ValidationError("tie-line target needs the whole model");
  int target_flow_pos = -1;
  if (!tie_target) {
    const auto it = std::find(lines.begin(), lines.end(), line);
    target_flow_pos = static_cast<int>(it - lines.begin());
  }

  std::map<int, int> bus_pos, gen_pos;
  for (size_t i = 0; i < buses.size(); ++i) bus_pos[buses[i]] = static_cast<int>(i);
  for (size_t i = 0; i < gens.size(); ++i) gen_pos[gens[i]] = static_cast<int>(i);

  for (int v : varying)
    if (!bus_pos.count(v))
      throw ValidationError("varying bus is not part of this (sub)model");

  const int ng = static_cast<int>(gens.size());
  const int nb = static_cast<int>(buses.size());
  const int nl = static_cast<int>(lines.size());
  const int nv = static_cast<int>(varying.size());
  const int n_vars = ng + nb + nl + (tie_target ? 1 : 0);
  const int x_off = 0, delta_off = ng, flow_off = ng + nb;
  const int n_rows = nl + (tie_target ? 1 : 0) + nb;

  ScreeningTemplate tpl;
  tpl.line = line;
  tpl.dir = dir;
  tpl.method = Method::S1;
  tpl.varying = varying;
  tpl.theta_base.resize(nv);
  for (int i = 0; i < nv; ++i) tpl.theta_base[i] = fc.load[varying[i]];
  tpl.compare_limit = net.branches[line].limit;

  LpProblem& lp = tpl.lp;
  lp = LpProblem::with_sizes(n_vars, n_rows);
  tpl.rhs_sens.setZero(n_rows, nv);
  tpl.obj_sens.setZero(nv);
  tpl.obj_base = 0.0;

  // Relaxed-commitment dispatch boxes.
  for (int i = 0; i < ng; ++i) {
    const Generator& gen = net.generators[gens[i]];
    lp.lower[x_off + i] = std::min(0.0, gen.pmin);
    lp.upper[x_off + i] = std::max(0.0, gen.pmax);
  }
  // Angles free; the reference is pinned only when the submodel contains it.
  const int ref = net.reference_index();
  for (int i = 0; i < nb; ++i) {
    const bool pin = buses[i] == ref;
    lp.lower[delta_off + i] = pin ? 0.0 : -kInf;
    lp.upper[delta_off + i] = pin ? 0.0 : kInf;
  }

  int row = 0;
  for (int i = 0; i < nl; ++i) {
    const int j = lines[i];
    const Branch& br = net.branches[j];
    lp.A(row, flow_off + i) = 1.0;
    lp.A(row, delta_off + bus_pos[net.bus_index(br.from_bus)]) = -1.0 / br.reactance;
    lp.A(row, delta_off + bus_pos[net.bus_index(br.to_bus)]) = 1.0 / br.reactance;
    lp.relations[row] = Relation::Equal;
    ++row;
    const bool is_target = (j == line);
    const double lim = br.limit;
    lp.upper[flow_off + i] = (!is_target && std::isfinite(lim)) ? lim : kInf;
    lp.lower[flow_off + i] = (!is_target && std::isfinite(lim)) ? -lim : -kInf;
  }
  if (tie_target) {
    const Branch& br = net.branches[line];
    lp.A(row, flow_off + nl) = 1.0;
    lp.A(row, delta_off + bus_pos[net.bus_index(br.from_bus)]) = -1.0 / br.reactance;
    lp.A(row, delta_off + bus_pos[net.bus_index(br.to_bus)]) = 1.0 / br.reactance;
    lp.relations[row] = Relation::Equal;
    ++row;
  }

  for (int i = 0; i < nb; ++i) {
    const int b = buses[i];
    for (int gidx = 0; gidx < ng; ++gidx)
      if (net.bus_index(net.generators[gens[gidx]].bus) == b)
        lp.A(row, x_off + gidx) = 1.0;
    for (int li = 0; li < nl; ++li) {
      const int orient = line_orientation(net, lines[li], b);
      if (orient != 0) lp.A(row, flow_off + li) = -orient;
    }
    lp.relations[row] = Relation::Equal;
    lp.rhs[row] = fc.load[b];
    for (int v = 0; v < nv; ++v)
      if (varying[v] == b) tpl.rhs_sens(row, v) = 1.0;
    ++row;
  }

  lp.maximize = (dir == Direction::Upper);
  lp.objective[flow_off + (tie_target ? nl : target_flow_pos)] = 1.0;
  return tpl;
}

BoundRecord solve_angle_bound(const ScreeningTemplate& tpl, double limit,
                              const ScreeningOptions& opts) {
  BoundRecord rec;
  rec.line = tpl.line;
  rec.dir = tpl.dir;
  rec.method = Method::S1;
  rec.source = SolveSource::Lp;
  if (!std::isfinite(limit)) {
    rec.redundant = true;
    rec.f_star = std::nan("");
    rec.margin = kInf;
    rec.source = SolveSource::Sentinel;
    rec.note = "unlimited line";
    return rec;
  }
  const LpSolution sol = solve_lp(tpl.lp, opts.lp);
  if (sol.status == LpStatus::Infeasible)
    throw ScreeningInfeasibleError("angle screening LP infeasible for line " +
                                   std::to_string(tpl.line));
  if (sol.status == LpStatus::Stalled)
    throw std::runtime_error("angle screening LP stalled");
  if (sol.status == LpStatus::Unbounded) {
    rec.f_star = tpl.dir == Direction::Upper ? kInf : -kInf;
    rec.margin = -kInf;
    rec.redundant = false;
    rec.note = "screening value unbounded (decoupled tie-line)";
    return rec;
  }
  rec.f_star = sol.objective;
  rec.margin = limit - std::abs(rec.f_star);
  rec.redundant = rec.margin > opts.tol.redundancy * std::max(1.0, limit);
  return rec;
}

}  // namespace

ScreeningTemplate make_whole_angle_template(const Network& net, const Forecast& fc,
                                            const AreaPartition& part, int line,
                                            Direction dir,
                                            const std::vector<int>& varying) {
  return make_angle_template(net, fc, part, -1, line, dir, varying);
}

ScreeningTemplate make_area_template(const Network& net, const Forecast& fc,
                                     const AreaPartition& part, int area, int line,
                                     Direction dir, const std::vector<int>& varying) {
  return make_angle_template(net, fc, part, area, line, dir, varying);
}

BoundRecord screen_whole_angle(const Network& net, const Forecast& fc,
                               const AreaPartition& part, int line, Direction dir,
                               const ScreeningOptions& opts) {
  if (!std::isfinite(net.branches[line].limit)) {
    BoundRecord rec{line, dir, true, std::nan(""), kInf, Method::S1,
                    SolveSource::Sentinel, "unlimited line"};
    return rec;
  }
  const ScreeningTemplate tpl = make_whole_angle_template(net, fc, part, line, dir);
  return solve_angle_bound(tpl, net.branches[line].limit, opts);
}

BoundRecord screen_area(const Network& net, const Forecast& fc,
                        const AreaPartition& part, int area, int line, Direction dir,
                        const ScreeningOptions& opts) {
  if (!std::isfinite(net.branches[line].limit)) {
    BoundRecord rec{line, dir, true, std::nan(""), kInf, Method::S1,
                    SolveSource::Sentinel, "unlimited line"};
    return rec;
  }
  const ScreeningTemplate tpl = make_area_template(net, fc, part, area, line, dir);
  return solve_angle_bound(tpl, net.branches[line].limit, opts);
}

ScreeningResult whole_screen(const Network& net, const Forecast& fc,
                             const AreaPartition& part, const ScreeningOptions& opts) {
  const int nl = net.num_lines();
  ScreeningResult out;
  out.method = Method::S1;
  out.records.resize(2 * nl);
  parallel_for(2 * nl, opts.threads, [&](int idx) {
    const int line = idx / 2;
    const Direction dir = idx % 2 == 0 ? Direction::Upper : Direction::Lower;
    out.records[idx] = screen_whole_angle(net, fc, part, line, dir, opts);
  });
  out.validate(nl);
  return out;
}

ScreeningResult union_screen(const Network& net, const Forecast& fc,
                             const AreaPartition& part, const ScreeningOptions& opts) {
  const int nl = net.num_lines();
  ScreeningResult out;
  out.method = Method::S1;
  out.records.resize(2 * nl);
  parallel_for(2 * nl, opts.threads, [&](int idx) {
    const int line = idx / 2;
    const Direction dir = idx % 2 == 0 ? Direction::Upper : Direction::Lower;
    const int area = part.line_area(net, line);
    out.records[idx] = area >= 0
                           ? screen_area(net, fc, part, area, line, dir, opts)
                           : screen_whole_angle(net, fc, part, line, dir, opts);
  });
  out.validate(nl);
  return out;
}

PolicyStore area_policy(const Network& net, const Forecast& fc,
                        const AreaPartition& part, int area,
                        const std::vector<int>& varying_dense,
                        const ParameterSet& ps, const MplpOptions& opts,
                        int threads) {
  part.validate(net);
  for (int v : varying_dense)
    if (part.area_of_bus.at(v) != area)
      throw ValidationError("varying bus lies outside the area");

  PolicyStore store;
  store.spec.method = Method::S1;
  for (int v : varying_dense) store.varying_buses.push_back(net.buses[v]);

  std::vector<int> lines;
  for (int j : part.internal_lines(net, area))
    if (std::isfinite(net.branches[j].limit)) lines.push_back(j);

  std::vector<AffinePolicy> built(2 * lines.size());
  parallel_for(static_cast<int>(2 * lines.size()), threads, [&](int idx) {
    const int line = lines[idx / 2];
    const Direction dir = idx % 2 == 0 ? Direction::Upper : Direction::Lower;
    const ScreeningTemplate tpl =
        make_area_template(net, fc, part, area, line, dir, varying_dense);
    const ParametricLp plp = build_parametric(tpl, ps);
    AffinePolicy pol = enumerate_regions(plp, opts);
    pol.base_load = fc.load;
    for (int v : varying_dense) pol.varying_buses.push_back(net.buses[v]);
    built[idx] = std::move(pol);
  });
  store.policies = std::move(built);
  return store;
}

}  // namespace ucscreen
