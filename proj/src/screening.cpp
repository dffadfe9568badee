#include "ucscreen/screening.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "ucscreen/parallel.hpp"

namespace ucscreen {

const BoundRecord& ScreeningResult::at(int line, Direction d) const {
  const size_t idx = 2 * line + static_cast<size_t>(d);
  if (idx >= records.size()) throw ValidationError("bound record out of range");
  return records[idx];
}

int ScreeningResult::non_redundant_count() const {
  int c = 0;
  for (const BoundRecord& r : records) c += !r.redundant;
  return c;
}

void ScreeningResult::validate(int n_lines) const {
  if (static_cast<int>(records.size()) != 2 * n_lines)
    throw ValidationError("screening result must cover every line twice");
  for (int j = 0; j < n_lines; ++j) {
    if (records[2 * j].line != j || records[2 * j].dir != Direction::Upper ||
        records[2 * j + 1].line != j || records[2 * j + 1].dir != Direction::Lower)
      throw ValidationError("screening records out of order");
  }
}

BoundSet reduce_model(const ScreeningResult& sr) {
  BoundSet keep(static_cast<int>(sr.records.size() / 2));
  for (const BoundRecord& r : sr.records)
    if (!r.redundant) keep.insert(r.line, r.dir);
  return keep;
}

void ScreeningSpec::validate(const Network& net) const {
  switch (method) {
    case Method::S1:
      break;
    case Method::S2:
      if (!gauss) throw ValidationError("S2 screening needs Gaussian uncertainty");
      gauss->validate(net);
      break;
    case Method::S3:
      if (!box) throw ValidationError("S3 screening needs box uncertainty");
      box->validate(net);
      break;
  }
}

LpProblem ScreeningTemplate::instantiate(const Eigen::VectorXd& theta) const {
  if (theta.size() != static_cast<Eigen::Index>(varying.size()))
    throw ValidationError("theta length does not match varying bus count");
  LpProblem p = lp;
  if (theta.size() > 0) p.rhs += rhs_sens * (theta - theta_base);
  return p;
}

double ScreeningTemplate::flow_value(double lp_objective,
                                     const Eigen::VectorXd& theta) const {
  double v = lp_objective + obj_base;
  if (theta.size() > 0) v += obj_sens.dot(theta - theta_base);
  return v;
}

namespace {

// Tightened flow limits of the chance-constrained screen; lines whose
// tightened limit goes negative are structurally infeasible and get dropped
// from every subproblem (conservative: dropping rows only enlarges maxima).
struct CcContext {
  double q_x = 0.0, q_f = 0.0, sigma_omega = 0.0;
  Eigen::VectorXd sigma_flow;
  Eigen::VectorXd tightened;        // per line
  std::vector<char> structurally_infeasible;
};

CcContext make_cc_context(const Network& net, const PtdfMatrix& ptdf,
                          const GaussianUncertainty& g) {
  CcContext c;
  c.q_x = normal_quantile(1.0 - g.epsilon_x);
  c.q_f = normal_quantile(1.0 - g.epsilon_f);
  c.sigma_omega = g.sigma_omega();
  c.sigma_flow = g.sigma_flow(net, ptdf);
  c.tightened.resize(net.num_lines());
  c.structurally_infeasible.assign(net.num_lines(), 0);
  for (int j = 0; j < net.num_lines(); ++j) {
    c.tightened[j] = net.branches[j].limit - c.q_f * c.sigma_flow[j];
    if (std::isfinite(net.branches[j].limit) && c.tightened[j] < 0.0)
      c.structurally_infeasible[j] = 1;
  }
  return c;
}

int varying_pos(const std::vector<int>& varying, int bus) {
  for (size_t i = 0; i < varying.size(); ++i)
    if (varying[i] == bus) return static_cast<int>(i);
  return -1;
}

}  // namespace

ScreeningTemplate make_screening_template(const Network& net, const PtdfMatrix& ptdf,
                                          const Forecast& fc, const ScreeningSpec& spec,
                                          int line, Direction dir,
                                          const std::vector<int>& varying) {
  fc.validate(net);
  spec.validate(net);
  if (line < 0 || line >= net.num_lines())
    throw ValidationError("screening target line out of range");
  for (int v : varying)
    if (v < 0 || v >= net.num_buses())
      throw ValidationError("varying bus index out of range");

  const int ng = net.num_gens();
  const int nb = net.num_buses();
  const int nv = static_cast<int>(varying.size());
  const Method method = spec.method;

  // Uncertain-node bookkeeping (S3).
  std::vector<int> unc_nodes;
  Eigen::VectorXd alpha;
  if (method == Method::S3) {
    unc_nodes = spec.box->uncertain_nodes;
    std::sort(unc_nodes.begin(), unc_nodes.end());
    for (int b : unc_nodes) {
      if (fc.load[b] < 0.0 && varying_pos(varying, b) < 0)
        throw ValidationError(
            "box uncertainty requires a nonnegative forecast on uncertain nodes");
    }
    if (spec.with_recourse) alpha = participation_factors(net);
  }
  const int nu = static_cast<int>(unc_nodes.size());

  CcContext cc;
  if (method == Method::S2) cc = make_cc_context(net, ptdf, *spec.gauss);

  // Generators that need an explicit relaxed commitment variable: only the
  // chance-constrained screen with pmin < 0, where the (x, r) projection of
  // the commitment box is not polyhedral in two variables alone.
  std::vector<int> u_extra;
  if (method == Method::S2) {
    for (int g = 0; g < ng; ++g)
      if (net.generators[g].pmin < 0.0) u_extra.push_back(g);
  }

  // Variable layout.
  const int x_off = 0;
  const int omega_off = (method == Method::S3) ? ng : -1;
  const int r_off = (method == Method::S2) ? ng : -1;
  int n_vars = ng;
  if (method == Method::S3) n_vars += nu;
  if (method == Method::S2) n_vars += ng + static_cast<int>(u_extra.size());
  const int u_off = n_vars - static_cast<int>(u_extra.size());

  // Row count.
  int n_rows = 1;  // balance
  if (method == Method::S3) {
    n_rows += 2 * nu;  // box
    if (spec.with_recourse) {
      for (int g = 0; g < ng; ++g)
        if (alpha[g] > 0.0) n_rows += 2;
    }
  }
  if (method == Method::S2) {
    for (int g = 0; g < ng; ++g) {
      const Generator& gen = net.generators[g];
      if (gen.pmin < 0.0)
        n_rows += 2;  // explicit-u rows
      else
        n_rows += gen.pmin > 0.0 ? 3 : 2;
    }
  }
  for (int k = 0; k < net.num_lines(); ++k) {
    if (k == line) continue;
    if (!std::isfinite(net.branches[k].limit)) continue;
    if (method == Method::S2 && cc.structurally_infeasible[k]) continue;
    n_rows += 2;
  }

  ScreeningTemplate tpl;
  tpl.line = line;
  tpl.dir = dir;
  tpl.method = method;
  tpl.varying = varying;
  tpl.theta_base.resize(nv);
  for (int i = 0; i < nv; ++i) tpl.theta_base[i] = fc.load[varying[i]];

  LpProblem& lp = tpl.lp;
  lp = LpProblem::with_sizes(n_vars, n_rows);
  tpl.rhs_sens.setZero(n_rows, nv);
  tpl.obj_sens.setZero(nv);

  // Variable bounds.
  for (int g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    if (method == Method::S2) {
      // Bounds come from the projection rows below.
      lp.lower[x_off + g] = -kInf;
      lp.upper[x_off + g] = kInf;
      lp.lower[r_off + g] = spec.gauss->alpha[g] * cc.q_x * cc.sigma_omega;
      lp.upper[r_off + g] = kInf;
    } else if (method == Method::S3 && spec.with_recourse && alpha[g] > 0.0) {
      // Constrained through the recourse rows.
      lp.lower[x_off + g] = -kInf;
      lp.upper[x_off + g] = kInf;
    } else {
      // Relaxed-commitment projection of u*pmin <= x <= u*pmax over u in [0,1].
      lp.lower[x_off + g] = std::min(0.0, gen.pmin);
      lp.upper[x_off + g] = std::max(0.0, gen.pmax);
    }
  }
  for (size_t e = 0; e < u_extra.size(); ++e) {
    lp.lower[u_off + e] = 0.0;
    lp.upper[u_off + e] = 1.0;
  }
  if (method == Method::S3) {
    for (int u = 0; u < nu; ++u) {
      lp.lower[omega_off + u] = -kInf;  // boxed by rows (parametric rhs)
      lp.upper[omega_off + u] = kInf;
    }
  }

  int row = 0;

  // System balance. S3 realized balance: sum x + sum omega = sum forecast.
  for (int g = 0; g < ng; ++g) lp.A(row, x_off + g) = 1.0;
  if (method == Method::S3 && !spec.with_recourse)
    for (int u = 0; u < nu; ++u) lp.A(row, omega_off + u) = 1.0;
  lp.relations[row] = Relation::Equal;
  lp.rhs[row] = fc.total();
  for (int i = 0; i < nv; ++i) tpl.rhs_sens(row, i) = 1.0;
  ++row;

  // Box rows: (1-beta2)*l <= omega <= (1-beta1)*l on uncertain nodes.
  if (method == Method::S3) {
    for (int u = 0; u < nu; ++u) {
      const int b = unc_nodes[u];
      const int vp = varying_pos(varying, b);
      lp.A(row, omega_off + u) = 1.0;
      lp.relations[row] = Relation::LessEqual;
      lp.rhs[row] = (1.0 - spec.box->beta1[b]) * fc.load[b];
      if (vp >= 0) tpl.rhs_sens(row, vp) = 1.0 - spec.box->beta1[b];
      ++row;
      lp.A(row, omega_off + u) = 1.0;
      lp.relations[row] = Relation::GreaterEqual;
      lp.rhs[row] = (1.0 - spec.box->beta2[b]) * fc.load[b];
      if (vp >= 0) tpl.rhs_sens(row, vp) = 1.0 - spec.box->beta2[b];
      ++row;
    }
    if (spec.with_recourse) {
      // min(0,pmin) <= x_g - alpha_g * Omega <= max(0,pmax)
      for (int g = 0; g < ng; ++g) {
        if (alpha[g] <= 0.0) continue;
        const Generator& gen = net.generators[g];
        lp.A(row, x_off + g) = 1.0;
        for (int u = 0; u < nu; ++u) lp.A(row, omega_off + u) = -alpha[g];
        lp.relations[row] = Relation::LessEqual;
        lp.rhs[row] = std::max(0.0, gen.pmax);
        ++row;
        lp.A(row, x_off + g) = 1.0;
        for (int u = 0; u < nu; ++u) lp.A(row, omega_off + u) = -alpha[g];
        lp.relations[row] = Relation::GreaterEqual;
        lp.rhs[row] = std::min(0.0, gen.pmin);
        ++row;
      }
    }
  }

  // Chance-constrained commitment projection.
  if (method == Method::S2) {
    int e = 0;
    for (int g = 0; g < ng; ++g) {
      const Generator& gen = net.generators[g];
      if (gen.pmin < 0.0) {
        // pmin*u + r <= x ; x + r <= pmax*u
        lp.A(row, u_off + e) = gen.pmin;
        lp.A(row, r_off + g) = 1.0;
        lp.A(row, x_off + g) = -1.0;
        lp.relations[row] = Relation::LessEqual;
        lp.rhs[row] = 0.0;
        ++row;
        lp.A(row, x_off + g) = 1.0;
        lp.A(row, r_off + g) = 1.0;
        lp.A(row, u_off + e) = -gen.pmax;
        lp.relations[row] = Relation::LessEqual;
        lp.rhs[row] = 0.0;
        ++row;
        ++e;
        continue;
      }
      // Exact projection over relaxed u for pmin >= 0:
      //   x + r <= pmax, x - r >= 0, and for pmin > 0 the mixing row
      //   pmin*(x + r) <= pmax*(x - r).
      lp.A(row, x_off + g) = 1.0;
      lp.A(row, r_off + g) = 1.0;
      lp.relations[row] = Relation::LessEqual;
      lp.rhs[row] = gen.pmax;
      ++row;
      lp.A(row, x_off + g) = 1.0;
      lp.A(row, r_off + g) = -1.0;
      lp.relations[row] = Relation::GreaterEqual;
      lp.rhs[row] = 0.0;
      ++row;
      if (gen.pmin > 0.0) {
        lp.A(row, x_off + g) = gen.pmin - gen.pmax;
        lp.A(row, r_off + g) = gen.pmin + gen.pmax;
        lp.relations[row] = Relation::LessEqual;
        lp.rhs[row] = 0.0;
        ++row;
      }
    }
  }

  // Other-line flow limits.
  for (int k = 0; k < net.num_lines(); ++k) {
    if (k == line) continue;
    if (!std::isfinite(net.branches[k].limit)) continue;
    if (method == Method::S2 && cc.structurally_infeasible[k]) continue;

    Eigen::RowVectorXd coeffs = Eigen::RowVectorXd::Zero(n_vars);
    for (int g = 0; g < ng; ++g)
      coeffs[x_off + g] = ptdf(k, net.bus_index(net.generators[g].bus));
    if (method == Method::S3) {
      double ak_dot_alpha = 0.0;
      if (spec.with_recourse) {
        for (int g = 0; g < ng; ++g)
          ak_dot_alpha += ptdf(k, net.bus_index(net.generators[g].bus)) * alpha[g];
      }
      for (int u = 0; u < nu; ++u)
        coeffs[omega_off + u] = ptdf(k, unc_nodes[u]) - ak_dot_alpha;
    }
    double offset = 0.0;
    for (int i = 0; i < nb; ++i) offset += ptdf(k, i) * fc.load[i];
    const double limit =
        method == Method::S2 ? cc.tightened[k] : net.branches[k].limit;

    lp.A.row(row) = coeffs;
    lp.relations[row] = Relation::LessEqual;
    lp.rhs[row] = limit + offset;
    for (int i = 0; i < nv; ++i) tpl.rhs_sens(row, i) = ptdf(k, varying[i]);
    ++row;

    lp.A.row(row) = coeffs;
    lp.relations[row] = Relation::GreaterEqual;
    lp.rhs[row] = -limit + offset;
    for (int i = 0; i < nv; ++i) tpl.rhs_sens(row, i) = ptdf(k, varying[i]);
    ++row;
  }

  // Objective: the flow on the target line, expressed in decision variables;
  // the forecast part moves into the affine offset.
  lp.maximize = (dir == Direction::Upper);
  for (int g = 0; g < ng; ++g)
    lp.objective[x_off + g] = ptdf(line, net.bus_index(net.generators[g].bus));
  if (method == Method::S3) {
    double aj_dot_alpha = 0.0;
    if (spec.with_recourse) {
      for (int g = 0; g < ng; ++g)
        aj_dot_alpha += ptdf(line, net.bus_index(net.generators[g].bus)) * alpha[g];
    }
    for (int u = 0; u < nu; ++u)
      lp.objective[omega_off + u] = ptdf(line, unc_nodes[u]) - aj_dot_alpha;
  }
  double obj_off = 0.0;
  for (int i = 0; i < nb; ++i) obj_off += ptdf(line, i) * fc.load[i];
  tpl.obj_base = -obj_off;
  for (int i = 0; i < nv; ++i) tpl.obj_sens[i] = -ptdf(line, varying[i]);

  tpl.compare_limit =
      method == Method::S2 ? cc.tightened[line] : net.branches[line].limit;
  if (method == Method::S2 && std::isfinite(net.branches[line].limit) &&
      cc.structurally_infeasible[line])
    tpl.note = "tightened limit negative: line is structurally infeasible in M2";
  return tpl;
}

namespace {

BoundRecord classify(const ScreeningTemplate& tpl, const LpSolution& sol,
                     double limit_scale, const Tolerances& tol) {
  BoundRecord rec;
  rec.line = tpl.line;
  rec.dir = tpl.dir;
  rec.method = tpl.method;
  rec.source = SolveSource::Lp;
  if (sol.status == LpStatus::Unbounded) {
    rec.f_star = tpl.dir == Direction::Upper ? kInf : -kInf;
    rec.margin = -kInf;
    rec.redundant = false;
    rec.note = "screening value unbounded";
    return rec;
  }
  rec.f_star = tpl.flow_value(sol.objective, tpl.theta_base);
  rec.margin = tpl.compare_limit - std::abs(rec.f_star);
  rec.redundant = rec.margin > tol.redundancy * std::max(1.0, limit_scale);
  return rec;
}

}  // namespace

ScreeningResult run_screening(const Network& net, const PtdfMatrix& ptdf,
                              const Forecast& fc, const ScreeningSpec& spec,
                              const ScreeningOptions& opts) {
  fc.validate(net);
  spec.validate(net);
  const int nl = net.num_lines();
  ScreeningResult out;
  out.method = spec.method;
  out.records.resize(2 * nl);

  CcContext cc;
  if (spec.method == Method::S2) cc = make_cc_context(net, ptdf, *spec.gauss);

  parallel_for(2 * nl, opts.threads, [&](int idx) {
    const int line = idx / 2;
    const Direction dir = idx % 2 == 0 ? Direction::Upper : Direction::Lower;
    BoundRecord& rec = out.records[idx];
    const double limit = net.branches[line].limit;

    if (!std::isfinite(limit)) {
      rec = BoundRecord{line, dir, true, std::nan(""), kInf, spec.method,
                        SolveSource::Sentinel, "unlimited line"};
      return;
    }
    if (spec.method == Method::S2 && cc.structurally_infeasible[line]) {
      rec = BoundRecord{line,       dir,
                        false,      std::nan(""),
                        cc.tightened[line], spec.method,
                        SolveSource::Sentinel,
                        "tightened limit negative: structurally infeasible in M2"};
      return;
    }

    const ScreeningTemplate tpl =
        make_screening_template(net, ptdf, fc, spec, line, dir, {});
    const LpSolution sol = solve_lp(tpl.lp, opts.lp);
    if (sol.status == LpStatus::Infeasible) {
      std::ostringstream os;
      os << "screening LP infeasible for line " << line << " (" << to_string(dir)
         << "): the " << to_string(spec.method)
         << " model has no feasible dispatch at this forecast";
      throw ScreeningInfeasibleError(os.str());
    }
    if (sol.status == LpStatus::Stalled)
      throw std::runtime_error("screening LP stalled; numerical failure");
    rec = classify(tpl, sol, limit, opts.tol);
  });

  out.validate(nl);
  return out;
}

ScreeningResult screen_deterministic(const Network& net, const PtdfMatrix& ptdf,
                                     const Forecast& fc,
                                     const ScreeningOptions& opts) {
  ScreeningSpec spec;
  spec.method = Method::S1;
  return run_screening(net, ptdf, fc, spec, opts);
}

ScreeningResult screen_robust(const Network& net, const PtdfMatrix& ptdf,
                              const Forecast& fc, const BoxUncertainty& unc,
                              bool with_recourse, const ScreeningOptions& opts) {
  ScreeningSpec spec;
  spec.method = Method::S3;
  spec.box = unc;
  spec.with_recourse = with_recourse;
  return run_screening(net, ptdf, fc, spec, opts);
}

ScreeningResult screen_cc(const Network& net, const PtdfMatrix& ptdf,
                          const Forecast& fc, const GaussianUncertainty& unc,
                          const ScreeningOptions& opts) {
  ScreeningSpec spec;
  spec.method = Method::S2;
  spec.gauss = unc;
  return run_screening(net, ptdf, fc, spec, opts);
}

namespace {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string to_csv(const ScreeningResult& sr) {
  std::ostringstream os;
  os << "line,direction,method,classification,f_star,margin,source\n";
  for (const BoundRecord& r : sr.records) {
    os << r.line << ',' << to_string(r.dir) << ',' << to_string(r.method) << ','
       << (r.redundant ? "redundant" : "non_redundant") << ','
       << format_number(r.f_star) << ',' << format_number(r.margin) << ','
       << to_string(r.source) << '\n';
  }
  return os.str();
}

std::string to_json_string(const ScreeningResult& sr) {
  nlohmann::json doc;
  doc["method"] = to_string(sr.method);
  doc["bounds"] = nlohmann::json::array();
  for (const BoundRecord& r : sr.records) {
    nlohmann::json b;
    b["line"] = r.line;
    b["direction"] = to_string(r.dir);
    b["method"] = to_string(r.method);
    b["classification"] = r.redundant ? "redundant" : "non_redundant";
    b["f_star"] = std::isfinite(r.f_star) ? nlohmann::json(r.f_star) : nlohmann::json();
    b["margin"] = std::isfinite(r.margin) ? nlohmann::json(r.margin) : nlohmann::json();
    b["source"] = to_string(r.source);
    if (!r.note.empty()) b["note"] = r.note;
    doc["bounds"].push_back(b);
  }
  doc["non_redundant_count"] = sr.non_redundant_count();
  return doc.dump(2);
}

}  // namespace ucscreen
