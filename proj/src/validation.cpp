#include "ucscreen/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "ucscreen/uc_models.hpp"

namespace ucscreen {

const char* to_string(ReducedFamily f) {
  switch (f) {
    case ReducedFamily::T1: return "T1";
    case ReducedFamily::T2: return "T2";
    case ReducedFamily::T3: return "T3";
    case ReducedFamily::T4: return "T4";
    case ReducedFamily::T5: return "T5";
  }
  return "?";
}

ReducedFamily family_from_string(const std::string& s) {
  if (s == "T1") return ReducedFamily::T1;
  if (s == "T2") return ReducedFamily::T2;
  if (s == "T3") return ReducedFamily::T3;
  if (s == "T4") return ReducedFamily::T4;
  if (s == "T5") return ReducedFamily::T5;
  throw ValidationError("unknown reduced-model family: " + s);
}

std::vector<Eigen::VectorXd> sample_realizations(const UncertaintyModel& unc,
                                                 const Forecast& fc, int n,
                                                 std::uint64_t seed) {
  if (n < 1) throw ValidationError("need at least one realization");
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  Rng rng(seed);
  if (const auto* g = std::get_if<GaussianUncertainty>(&unc)) {
    for (int s = 0; s < n; ++s) {
      Eigen::VectorXd load = fc.load;
      for (int b = 0; b < load.size(); ++b)
        load[b] -= std::sqrt(g->sigma2[b]) * rng.normal();
      out.push_back(std::move(load));
    }
  } else {
    const auto& box = std::get<BoxUncertainty>(unc);
    for (int s = 0; s < n; ++s) {
      Eigen::VectorXd load = fc.load;
      for (int b : box.uncertain_nodes) {
        const double lo = std::min(box.beta1[b] * fc.load[b], box.beta2[b] * fc.load[b]);
        const double hi = std::max(box.beta1[b] * fc.load[b], box.beta2[b] * fc.load[b]);
        load[b] = rng.uniform(lo, hi);
      }
      out.push_back(std::move(load));
    }
  }
  return out;
}

std::string check_deterministic_feasibility(const Network& net, const PtdfMatrix& ptdf,
                                            const Eigen::VectorXd& u,
                                            const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& load, double tol) {
  std::ostringstream os;
  if (std::abs(x.sum() - load.sum()) > tol) {
    os << "balance violated by " << x.sum() - load.sum() << " MW";
    return os.str();
  }
  for (int g = 0; g < net.num_gens(); ++g) {
    const Generator& gen = net.generators[g];
    const double lo = u[g] * gen.pmin, hi = u[g] * gen.pmax;
    if (x[g] < lo - tol || x[g] > hi + tol) {
      os << "generator " << g << " dispatch " << x[g] << " outside [" << lo << ","
         << hi << "]";
      return os.str();
    }
  }
  const Eigen::VectorXd flows = line_flows(net, ptdf, x, load);
  for (int j = 0; j < net.num_lines(); ++j) {
    const double lim = net.branches[j].limit;
    if (!std::isfinite(lim)) continue;
    if (std::abs(flows[j]) > lim + tol) {
      os << "line " << j << " flow " << flows[j] << " exceeds limit " << lim;
      return os.str();
    }
  }
  return {};
}

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct OnceSolved {
  Eigen::VectorXd u, x;
  Eigen::VectorXd alpha;
  double planned_cost = 0.0;
};

}  // namespace

ValidationReport validate_reduced(ReducedFamily family, const Network& net,
                                  const PtdfMatrix& ptdf, const Forecast& fc,
                                  const UncertaintyModel& unc, const BoundSet& keep,
                                  const std::vector<Eigen::VectorXd>& realizations,
                                  std::uint64_t seed, const ValidationOptions& opts) {
  fc.validate(net);
  ValidationReport rep;
  rep.family = to_string(family);
  rep.n_samples = static_cast<int>(realizations.size());
  rep.seed = seed;
  rep.kept_bounds = keep.count();
  const BoundSet full = BoundSet::all(net.num_lines());

  const bool recourse_family =
      family == ReducedFamily::T4 || family == ReducedFamily::T5;

  OnceSolved once;
  if (family == ReducedFamily::T4) {
    const auto* g = std::get_if<GaussianUncertainty>(&unc);
    if (!g) throw ValidationError("T4 needs Gaussian uncertainty");
    const UcModel reduced = build_cc_uc(net, ptdf, fc, *g, keep);
    const UcSolution sol = solve_uc(reduced, opts.milp);
    if (sol.status != MilpStatus::Optimal)
      throw ValidationError("reduced chance-constrained model infeasible at the forecast");
    once.u = sol.u;
    once.x = sol.x;
    once.alpha = g->alpha;
    once.planned_cost = sol.objective;
  } else if (family == ReducedFamily::T5) {
    const auto* b = std::get_if<BoxUncertainty>(&unc);
    if (!b) throw ValidationError("T5 needs box uncertainty");
    const RobustScenarioModel reduced =
        build_robust_uc_scenarios(net, ptdf, fc, *b, keep);
    const UcSolution sol = solve_uc(reduced.model, opts.milp);
    if (sol.status != MilpStatus::Optimal)
      throw ValidationError("reduced robust model infeasible at the forecast");
    once.u = sol.u;
    once.x = sol.x;
    once.alpha = participation_factors(net);
    once.planned_cost = sol.objective;
  }

  Eigen::VectorXd cost(net.num_gens());
  for (int g = 0; g < net.num_gens(); ++g) cost[g] = net.generators[g].cost;

  double gap_sum = 0.0, reduced_time = 0.0, full_time = 0.0;
  int usable = 0;

  for (const Eigen::VectorXd& load : realizations) {
    Forecast realized{load};

    const double tf0 = now_seconds();
    const UcModel full_model = build_deterministic_uc(net, ptdf, realized, full);
    const UcSolution full_sol = solve_uc(full_model, opts.milp);
    full_time += now_seconds() - tf0;
    if (full_sol.status != MilpStatus::Optimal) {
      ++rep.n_full_infeasible;
      continue;
    }
    ++usable;

    Eigen::VectorXd u, x;
    double realized_cost = 0.0;
    bool reduced_ok = true;
    if (recourse_family) {
      u = once.u;
      x = apply_recourse(once.x, once.alpha, load);
      realized_cost = cost.dot(x);
    } else {
      const double tr0 = now_seconds();
      const UcModel reduced_model = build_deterministic_uc(net, ptdf, realized, keep);
      const UcSolution red = solve_uc(reduced_model, opts.milp);
      reduced_time += now_seconds() - tr0;
      if (red.status != MilpStatus::Optimal) {
        // The reduced model relaxes the full one, so this cannot happen when
        // the full model is feasible; guard anyway.
        reduced_ok = false;
      } else {
        u = red.u;
        x = red.x;
        realized_cost = red.objective;
      }
    }

    const std::string violation =
        reduced_ok ? check_deterministic_feasibility(net, ptdf, u, x, load,
                                                     opts.feasibility_tol)
                   : "reduced model infeasible";
    if (!violation.empty()) {
      ++rep.n_infeasible;
      continue;
    }
    const double gap = (realized_cost - full_sol.objective) /
                       std::max(1.0, std::abs(full_sol.objective));
    gap_sum += gap;
    rep.max_gap = std::max(rep.max_gap, gap);
    ++rep.n_gap_samples;
  }

  rep.infeasibility_rate = usable > 0 ? static_cast<double>(rep.n_infeasible) / usable : 0.0;
  rep.mean_gap = rep.n_gap_samples > 0 ? gap_sum / rep.n_gap_samples : 0.0;
  rep.mean_full_solve_seconds =
      rep.n_samples > 0 ? full_time / rep.n_samples : 0.0;
  const int reduced_solves = recourse_family ? 1 : usable;
  rep.mean_reduced_solve_seconds =
      reduced_solves > 0 ? reduced_time / reduced_solves : 0.0;

  nlohmann::json echo;
  echo["family"] = rep.family;
  echo["n"] = rep.n_samples;
  echo["seed"] = seed;
  echo["kept_bounds"] = rep.kept_bounds;
  echo["feasibility_tol"] = opts.feasibility_tol;
  rep.config_echo = echo.dump();
  return rep;
}

TimingTable timing_compare(const PolicyStore& store, const Network& net,
                           const PtdfMatrix& ptdf,
                           const std::vector<Forecast>& forecasts,
                           const ScreeningOptions& opts) {
  TimingTable table;
  table.n_forecasts = static_cast<int>(forecasts.size());
  int solved_bounds = 0;
  for (int j = 0; j < net.num_lines(); ++j)
    if (std::isfinite(net.branches[j].limit)) solved_bounds += 2;
  table.n_bounds = solved_bounds;

  // Correctness gate first: never report the speed of a wrong answer.
  std::vector<ScreeningResult> lp_results, hybrid_results;
  for (const Forecast& fc : forecasts) {
    lp_results.push_back(run_screening(net, ptdf, fc, store.spec, opts));
    hybrid_results.push_back(hybrid_screen(store, net, ptdf, fc, opts));
  }
  table.classifications_match = true;
  for (size_t i = 0; i < forecasts.size(); ++i) {
    for (size_t k = 0; k < lp_results[i].records.size(); ++k) {
      const BoundRecord& a = lp_results[i].records[k];
      const BoundRecord& b = hybrid_results[i].records[k];
      if (a.redundant != b.redundant) {
        table.classifications_match = false;
        table.mismatches.push_back({a.line, a.dir, a.redundant, b.redundant});
      }
      if (b.source == SolveSource::Policy) ++table.policy_hits;
      else if (b.source == SolveSource::Lp) ++table.lp_fallbacks;
    }
  }
  if (!table.classifications_match) return table;

  // Timed passes.
  const double t_lp0 = now_seconds();
  for (const Forecast& fc : forecasts) run_screening(net, ptdf, fc, store.spec, opts);
  table.lp_total_seconds = now_seconds() - t_lp0;

  const double t_hy0 = now_seconds();
  for (const Forecast& fc : forecasts) hybrid_screen(store, net, ptdf, fc, opts);
  table.hybrid_total_seconds = now_seconds() - t_hy0;

  // Pure policy evaluation time (point location + affine law).
  std::vector<int> varying_dense;
  for (int bus_id : store.varying_buses) varying_dense.push_back(net.bus_index(bus_id));
  long evals = 0;
  volatile double sink = 0.0;  // defeats dead-code elimination of the timed loop
  const double t_pe0 = now_seconds();
  for (const Forecast& fc : forecasts) {
    Eigen::VectorXd theta(varying_dense.size());
    for (size_t i = 0; i < varying_dense.size(); ++i) theta[i] = fc.load[varying_dense[i]];
    for (const AffinePolicy& pol : store.policies) {
      if (const auto v = pol.evaluate(theta)) sink = sink + *v;
      ++evals;
    }
  }
  table.policy_eval_seconds = now_seconds() - t_pe0;

  const long lp_solves = static_cast<long>(forecasts.size()) * solved_bounds;
  table.mean_lp_per_bound = lp_solves > 0 ? table.lp_total_seconds / lp_solves : 0.0;
  table.mean_policy_per_bound = evals > 0 ? table.policy_eval_seconds / evals : 0.0;
  table.speedup = table.mean_policy_per_bound > 0.0
                      ? table.mean_lp_per_bound / table.mean_policy_per_bound
                      : 0.0;
  return table;
}

std::string report_to_json(const ValidationReport& r) {
  nlohmann::json j;
  j["family"] = r.family;
  j["n_samples"] = r.n_samples;
  j["n_infeasible"] = r.n_infeasible;
  j["n_full_infeasible"] = r.n_full_infeasible;
  j["infeasibility_rate"] = r.infeasibility_rate;
  j["mean_gap"] = r.mean_gap;
  j["max_gap"] = r.max_gap;
  j["n_gap_samples"] = r.n_gap_samples;
  j["seed"] = r.seed;
  j["kept_bounds"] = r.kept_bounds;
  j["timing"] = {{"mean_reduced_solve_seconds", r.mean_reduced_solve_seconds},
                 {"mean_full_solve_seconds", r.mean_full_solve_seconds}};
  j["config"] = nlohmann::json::parse(r.config_echo);
  return j.dump(2);
}

std::string report_to_csv(const ValidationReport& r) {
  std::ostringstream os;
  os << "family,n_samples,n_infeasible,n_full_infeasible,infeasibility_rate,"
        "mean_gap,max_gap,n_gap_samples,kept_bounds,seed\n";
  char buf[64];
  os << r.family << ',' << r.n_samples << ',' << r.n_infeasible << ','
     << r.n_full_infeasible << ',';
  std::snprintf(buf, sizeof(buf), "%.9g", r.infeasibility_rate);
  os << buf << ',';
  std::snprintf(buf, sizeof(buf), "%.9g", r.mean_gap);
  os << buf << ',';
  std::snprintf(buf, sizeof(buf), "%.9g", r.max_gap);
  os << buf << ',' << r.n_gap_samples << ',' << r.kept_bounds << ',' << r.seed
     << '\n';
  return os.str();
}

std::string timing_to_json(const TimingTable& t) {
  nlohmann::json j;
  j["classifications_match"] = t.classifications_match;
  j["n_forecasts"] = t.n_forecasts;
  j["n_bounds"] = t.n_bounds;
  j["policy_hits"] = t.policy_hits;
  j["lp_fallbacks"] = t.lp_fallbacks;
  if (!t.classifications_match) {
    j["mismatches"] = nlohmann::json::array();
    for (const TimingMismatch& m : t.mismatches)
      j["mismatches"].push_back({{"line", m.line},
                                 {"direction", to_string(m.dir)},
                                 {"lp_redundant", m.lp_redundant},
                                 {"hybrid_redundant", m.hybrid_redundant}});
    return j.dump(2);
  }
  j["lp_total_seconds"] = t.lp_total_seconds;
  j["hybrid_total_seconds"] = t.hybrid_total_seconds;
  j["policy_eval_seconds"] = t.policy_eval_seconds;
  j["mean_lp_per_bound"] = t.mean_lp_per_bound;
  j["mean_policy_per_bound"] = t.mean_policy_per_bound;
  j["speedup"] = t.speedup;
  return j.dump(2);
}

}  // namespace ucscreen
