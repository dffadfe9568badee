#include "ucscreen/uc_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ucscreen {

int BoundSet::count() const {
  int c = 0;
  for (auto v : mask_) c += v != 0;
  return c;
}

std::vector<LineBound> BoundSet::to_list() const {
  std::vector<LineBound> out;
  for (int j = 0; j < num_lines(); ++j) {
    if (contains(j, Direction::Upper)) out.push_back({j, Direction::Upper});
    if (contains(j, Direction::Lower)) out.push_back({j, Direction::Lower});
  }
  return out;
}

Eigen::VectorXd participation_factors(const Network& net) {
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(net.num_gens());
  int participating = 0;
  for (int g = 0; g < net.num_gens(); ++g)
    if (net.generators[g].participates && net.generators[g].pmax > 0.0)
      ++participating;
  if (participating == 0)
    throw ValidationError("no participating generator with nonzero capacity");
  for (int g = 0; g < net.num_gens(); ++g)
    if (net.generators[g].participates && net.generators[g].pmax > 0.0)
      alpha[g] = 1.0 / participating;
  return alpha;
}

Eigen::VectorXd line_flows(const Network& net, const PtdfMatrix& ptdf,
                           const Eigen::VectorXd& dispatch,
                           const Eigen::VectorXd& load) {
  Eigen::VectorXd injection = -load;
  for (int g = 0; g < net.num_gens(); ++g)
    injection[net.bus_index(net.generators[g].bus)] += dispatch[g];
  return ptdf.factors * injection;
}

namespace {

// Commitment-feasible dispatch box per generator under relaxed or binary u.
void gen_variable_bounds(const Generator& g, double& lo, double& up) {
  lo = std::min(0.0, g.pmin);
  up = std::max(0.0, g.pmax);
}

// PTDF row collapsed onto generator variables.
Eigen::VectorXd gen_row(const Network& net, const PtdfMatrix& ptdf, int line) {
  Eigen::VectorXd row(net.num_gens());
  for (int g = 0; g < net.num_gens(); ++g)
    row[g] = ptdf(line, net.bus_index(net.generators[g].bus));
  return row;
}

double flow_offset(const Network& net, const PtdfMatrix& ptdf, int line,
                   const Eigen::VectorXd& load) {
  double s = 0.0;
  for (int i = 0; i < net.num_buses(); ++i) s += ptdf(line, i) * load[i];
  return s;
}

}  // namespace

UcSolution solve_uc(const UcModel& model, const MilpOptions& opts) {
  const MilpSolution m = solve_milp(model.problem, opts);
  UcSolution out;
  out.status = m.status;
  out.node_count = m.node_count;
  out.wall_seconds = m.wall_seconds;
  if (m.status == MilpStatus::Infeasible || (m.status == MilpStatus::NodeLimit && !m.has_incumbent))
    return out;
  out.objective = m.objective;
  out.u = m.x.segment(model.u_offset, model.n_gens);
  out.x = m.x.segment(model.x_offset, model.n_gens);
  if (model.r_offset >= 0) out.r = m.x.segment(model.r_offset, model.n_gens);
  return out;
}

UcModel build_deterministic_uc(const Network& net, const PtdfMatrix& ptdf,
                               const Forecast& fc, const BoundSet& keep) {
  fc.validate(net);
  const int ng = net.num_gens();
  std::vector<LineBound> kept;
  for (const LineBound& lb : keep.to_list())
    if (std::isfinite(net.branches[lb.line].limit)) kept.push_back(lb);

  const int n_vars = 2 * ng;               // [u | x]
  const int n_rows = 2 * ng + 1 + static_cast<int>(kept.size());
  UcModel model;
  model.n_gens = ng;
  model.u_offset = 0;
  model.x_offset = ng;
  LpProblem& lp = model.problem.lp;
  lp = LpProblem::with_sizes(n_vars, n_rows);

  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    lp.lower[g] = 0.0;
    lp.upper[g] = 1.0;
    gen_variable_bounds(gen, lp.lower[ng + g], lp.upper[ng + g]);
    lp.objective[ng + g] = gen.cost;
    model.problem.binary_indices.push_back(g);
    // x_g <= pmax * u_g
    lp.A(2 * g, ng + g) = 1.0;
    lp.A(2 * g, g) = -gen.pmax;
    lp.relations[2 * g] = Relation::LessEqual;
    // x_g >= pmin * u_g
    lp.A(2 * g + 1, ng + g) = 1.0;
    lp.A(2 * g + 1, g) = -gen.pmin;
    lp.relations[2 * g + 1] = Relation::GreaterEqual;
  }

  const int balance_row = 2 * ng;
  for (int g = 0; g < ng; ++g) lp.A(balance_row, ng + g) = 1.0;
  lp.relations[balance_row] = Relation::Equal;
  lp.rhs[balance_row] = fc.total();

  int row = balance_row + 1;
  for (const LineBound& lb : kept) {
    const Eigen::VectorXd a = gen_row(net, ptdf, lb.line);
    const double off = flow_offset(net, ptdf, lb.line, fc.load);
    lp.A.row(row).segment(ng, ng) = a.transpose();
    if (lb.dir == Direction::Upper) {
      lp.relations[row] = Relation::LessEqual;
      lp.rhs[row] = net.branches[lb.line].limit + off;
    } else {
      lp.relations[row] = Relation::GreaterEqual;
      lp.rhs[row] = -net.branches[lb.line].limit + off;
    }
    model.flow_rows.emplace_back(row, lb);
    ++row;
  }
  return model;
}

UcModel build_cc_uc(const Network& net, const PtdfMatrix& ptdf, const Forecast& fc,
                    const GaussianUncertainty& unc, const BoundSet& keep) {
  fc.validate(net);
  unc.validate(net);
  const int ng = net.num_gens();
  const double q_x = normal_quantile(1.0 - unc.epsilon_x);
  const double q_f = normal_quantile(1.0 - unc.epsilon_f);
  const double s_omega = unc.sigma_omega();
  const Eigen::VectorXd s_flow = unc.sigma_flow(net, ptdf);

  std::vector<LineBound> kept;
  std::vector<int> broken;
  for (const LineBound& lb : keep.to_list()) {
    const double lim = net.branches[lb.line].limit;
    if (!std::isfinite(lim)) continue;
    if (lim - q_f * s_flow[lb.line] < 0.0) {
      broken.push_back(lb.line);
      continue;
    }
    kept.push_back(lb);
  }
  if (!broken.empty()) {
    std::sort(broken.begin(), broken.end());
    broken.erase(std::unique(broken.begin(), broken.end()), broken.end());
    std::ostringstream os;
    os << "chance-constrained model is structurally infeasible: tightened "
          "limit negative on line(s)";
    for (int j : broken) os << " " << j;
    throw ValidationError(os.str());
  }

  const int n_vars = 3 * ng;  // [u | x | r]
  const int n_rows = 2 * ng + 1 + static_cast<int>(kept.size());
  UcModel model;
  model.n_gens = ng;
  model.u_offset = 0;
  model.x_offset = ng;
  model.r_offset = 2 * ng;
  LpProblem& lp = model.problem.lp;
  lp = LpProblem::with_sizes(n_vars, n_rows);

  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    lp.lower[g] = 0.0;
    lp.upper[g] = 1.0;
    gen_variable_bounds(gen, lp.lower[ng + g], lp.upper[ng + g]);
    lp.objective[ng + g] = gen.cost;
    // Reserve floor from the mismatch quantile.
    lp.lower[2 * ng + g] = unc.alpha[g] * q_x * s_omega;
    lp.upper[2 * ng + g] = kInf;
    model.problem.binary_indices.push_back(g);
    // x_g + r_g <= pmax * u_g
    lp.A(2 * g, ng + g) = 1.0;
    lp.A(2 * g, 2 * ng + g) = 1.0;
    lp.A(2 * g, g) = -gen.pmax;
    lp.relations[2 * g] = Relation::LessEqual;
    // x_g - r_g >= pmin * u_g
    lp.A(2 * g + 1, ng + g) = 1.0;
    lp.A(2 * g + 1, 2 * ng + g) = -1.0;
    lp.A(2 * g + 1, g) = -gen.pmin;
    lp.relations[2 * g + 1] = Relation::GreaterEqual;
  }

  const int balance_row = 2 * ng;
  for (int g = 0; g < ng; ++g) lp.A(balance_row, ng + g) = 1.0;
  lp.relations[balance_row] = Relation::Equal;
  lp.rhs[balance_row] = fc.total();

  int row = balance_row + 1;
  for (const LineBound& lb : kept) {
    const Eigen::VectorXd a = gen_row(net, ptdf, lb.line);
    const double off = flow_offset(net, ptdf, lb.line, fc.load);
    const double tightened = net.branches[lb.line].limit - q_f * s_flow[lb.line];
    lp.A.row(row).segment(ng, ng) = a.transpose();
    if (lb.dir == Direction::Upper) {
      lp.relations[row] = Relation::LessEqual;
      lp.rhs[row] = tightened + off;
    } else {
      lp.relations[row] = Relation::GreaterEqual;
      lp.rhs[row] = -tightened + off;
    }
    model.flow_rows.emplace_back(row, lb);
    ++row;
  }
  return model;
}

RobustScenarioModel build_robust_uc_scenarios(const Network& net,
                                              const PtdfMatrix& ptdf,
                                              const Forecast& fc,
                                              const BoxUncertainty& unc,
                                              const BoundSet& keep,
                                              const RobustOptions& opts) {
  fc.validate(net);
  unc.validate(net);
  const int k = static_cast<int>(unc.uncertain_nodes.size());
  if (k > opts.max_uncertain_nodes) {
    std::ostringstream os;
    os << "robust vertex enumeration refused: " << k << " uncertain nodes give 2^"
       << k << " scenarios (cap " << opts.max_uncertain_nodes
       << "); reduce the uncertain node set";
    throw ValidationError(os.str());
  }
  for (int b : unc.uncertain_nodes)
    if (fc.load[b] < 0.0)
      throw ValidationError(
          "box uncertainty requires a nonnegative forecast on uncertain nodes");

  const Eigen::VectorXd alpha = participation_factors(net);
  const int ng = net.num_gens();

  std::vector<Eigen::VectorXd> realizations;
  const long n_scen = 1L << k;
  realizations.reserve(n_scen);
  for (long s = 0; s < n_scen; ++s) {
    Eigen::VectorXd load = fc.load;
    for (int i = 0; i < k; ++i) {
      const int b = unc.uncertain_nodes[i];
      load[b] = ((s >> i) & 1) ? unc.beta2[b] * fc.load[b] : unc.beta1[b] * fc.load[b];
    }
    realizations.push_back(std::move(load));
  }

  std::vector<LineBound> kept;
  for (const LineBound& lb : keep.to_list())
    if (std::isfinite(net.branches[lb.line].limit)) kept.push_back(lb);

  const int n_vars = 2 * ng + 1;  // [u | x | t]
  const int t_col = 2 * ng;
  const long rows_per_scen = 2 * ng + static_cast<long>(kept.size()) + 1;
  const long n_rows = 1 + n_scen * rows_per_scen;

  RobustScenarioModel out;
  UcModel& model = out.model;
  model.n_gens = ng;
  model.u_offset = 0;
  model.x_offset = ng;
  model.t_offset = t_col;
  LpProblem& lp = model.problem.lp;
  lp = LpProblem::with_sizes(n_vars, static_cast<int>(n_rows));

  for (int g = 0; g < ng; ++g) {
    lp.lower[g] = 0.0;
    lp.upper[g] = 1.0;
    model.problem.binary_indices.push_back(g);
    // The static dispatch box stays valid: the mismatch interval always
    // contains zero, so the per-scenario rows only tighten it.
    gen_variable_bounds(net.generators[g], lp.lower[ng + g], lp.upper[ng + g]);
  }
  lp.objective[t_col] = 1.0;

  const int balance_row = 0;
  for (int g = 0; g < ng; ++g) lp.A(balance_row, ng + g) = 1.0;
  lp.relations[balance_row] = Relation::Equal;
  lp.rhs[balance_row] = fc.total();

  const Eigen::VectorXd cost_gen = [&] {
    Eigen::VectorXd c(ng);
    for (int g = 0; g < ng; ++g) c[g] = net.generators[g].cost;
    return c;
  }();

  long row = 1;
  for (long s = 0; s < n_scen; ++s) {
    // Scheduled generation balances the forecast; the per-scenario shift is
    // the realized-minus-forecast total distributed by alpha.
    const double shift = realizations[s].sum() - fc.total();
    for (int g = 0; g < ng; ++g) {
      const Generator& gen = net.generators[g];
      // x_g + alpha_g*shift <= pmax * u_g
      lp.A(row, ng + g) = 1.0;
      lp.A(row, g) = -gen.pmax;
      lp.relations[row] = Relation::LessEqual;
      lp.rhs[row] = -alpha[g] * shift;
      ++row;
      // x_g + alpha_g*shift >= pmin * u_g
      lp.A(row, ng + g) = 1.0;
      lp.A(row, g) = -gen.pmin;
      lp.relations[row] = Relation::GreaterEqual;
      lp.rhs[row] = -alpha[g] * shift;
      ++row;
    }
    for (const LineBound& lb : kept) {
      const Eigen::VectorXd a = gen_row(net, ptdf, lb.line);
      const double off = flow_offset(net, ptdf, lb.line, realizations[s]);
      const double recourse_term = shift * a.dot(alpha);
      lp.A.row(row).segment(ng, ng) = a.transpose();
      if (lb.dir == Direction::Upper) {
        lp.relations[row] = Relation::LessEqual;
        lp.rhs[row] = net.branches[lb.line].limit + off - recourse_term;
      } else {
        lp.relations[row] = Relation::GreaterEqual;
        lp.rhs[row] = -net.branches[lb.line].limit + off - recourse_term;
      }
      model.flow_rows.emplace_back(static_cast<int>(row), lb);
      ++row;
    }
    // c.x + (c.alpha)*shift <= t
    lp.A.row(row).segment(ng, ng) = cost_gen.transpose();
    lp.A(row, t_col) = -1.0;
    lp.relations[row] = Relation::LessEqual;
    lp.rhs[row] = -shift * cost_gen.dot(alpha);
    ++row;
  }
  return out;
}

Eigen::VectorXd apply_recourse(const Eigen::VectorXd& dispatch,
                               const Eigen::VectorXd& alpha,
                               const Eigen::VectorXd& realized_load) {
  if (alpha.size() != dispatch.size())
    throw ValidationError("alpha length must match dispatch length");
  if (std::abs(alpha.sum() - 1.0) > 1e-9)
    throw ValidationError("participation factors must sum to 1");
  const double mismatch = realized_load.sum() - dispatch.sum();
  return dispatch + alpha * mismatch;
}

}  // namespace ucscreen
