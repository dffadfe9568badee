#include "ucscreen/mplp.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ucscreen/parallel.hpp"

namespace ucscreen {

ParameterSet ParameterSet::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw ValidationError("box bounds length mismatch");
  ParameterSet ps;
  ps.H.setZero(2 * d, d);
  ps.h.resize(2 * d);
  for (int i = 0; i < d; ++i) {
    if (!(lo[i] <= hi[i])) throw ValidationError("box lower bound above upper");
    ps.H(2 * i, i) = 1.0;
    ps.h[2 * i] = hi[i];
    ps.H(2 * i + 1, i) = -1.0;
    ps.h[2 * i + 1] = -lo[i];
  }
  return ps;
}

bool ParameterSet::contains(const Eigen::VectorXd& theta, double tol) const {
  if (theta.size() != dim()) return false;
  if (num_rows() == 0) return true;
  return ((H * theta - h).array() <= tol).all();
}

namespace {

// Chebyshev center of {G theta <= g} with unit-norm rows assumed.
// Returns radius (negative means empty).
double chebyshev_center(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                        Eigen::VectorXd& center, const LpOptions& lopts = {}) {
  const int d = static_cast<int>(G.cols());
  const int m = static_cast<int>(G.rows());
  LpProblem p = LpProblem::with_sizes(d + 1, m);
  p.A.leftCols(d) = G;
  p.A.col(d).setOnes();
  p.rhs = g;
  p.objective[d] = 1.0;
  p.maximize = true;
  const LpSolution sol = solve_lp(p, lopts);
  if (sol.status != LpStatus::Optimal) {
    if (sol.status == LpStatus::Unbounded) {
      // Unbounded radius: pick any feasible point by capping r.
      LpProblem q = p;
      q.upper[d] = 1e6;
      const LpSolution s2 = solve_lp(q, lopts);
      if (s2.status == LpStatus::Optimal) {
        center = s2.x.head(d);
        return s2.objective;
      }
    }
    return -1.0;
  }
  center = sol.x.head(d);
  return sol.objective;
}

void normalize_rows(Eigen::MatrixXd& G, Eigen::VectorXd& g) {
  for (int i = 0; i < G.rows(); ++i) {
    const double n = G.row(i).norm();
    if (n > 1e-14) {
      G.row(i) /= n;
      g[i] /= n;
    }
  }
}

}  // namespace

void ParameterSet::check_valid(Eigen::VectorXd& box_lo, Eigen::VectorXd& box_hi) const {
  const int d = dim();
  if (d == 0) {
    box_lo.resize(0);
    box_hi.resize(0);
    return;
  }
  if (h.size() != num_rows()) throw ValidationError("parameter set H/h mismatch");
  Eigen::MatrixXd Hn = H;
  Eigen::VectorXd hn = h;
  normalize_rows(Hn, hn);
  Eigen::VectorXd center;
  const double radius = chebyshev_center(Hn, hn, center);
  if (radius < 1e-9)
    throw ValidationError("parameter set is empty or has empty interior");

  box_lo.resize(d);
  box_hi.resize(d);
  for (int i = 0; i < d; ++i) {
    for (int sgn : {+1, -1}) {
      LpProblem p = LpProblem::with_sizes(d, num_rows());
      p.A = H;
      p.rhs = h;
      p.objective[i] = sgn;
      p.maximize = true;
      const LpSolution sol = solve_lp(p);
      if (sol.status == LpStatus::Unbounded)
        throw ValidationError("parameter set is unbounded");
      if (sol.status != LpStatus::Optimal)
        throw ValidationError("parameter set bound probe failed");
      if (sgn > 0)
        box_hi[i] = sol.objective;
      else
        box_lo[i] = -sol.objective;
    }
  }
}

bool CriticalRegion::contains(const Eigen::VectorXd& theta, double tol) const {
  if (G.rows() == 0) return true;
  return ((G * theta - g).array() <= tol).all();
}

std::optional<double> AffinePolicy::evaluate(const Eigen::VectorXd& theta,
                                             double tol) const {
  if (theta.size() != static_cast<Eigen::Index>(varying_buses.size()))
    return std::nullopt;
  for (const CriticalRegion& r : regions) {
    if (r.contains(theta, tol))
      return r.a_hat.dot(theta) + r.b_hat;
  }
  return std::nullopt;
}

std::optional<double> evaluate_policy(const AffinePolicy& pol,
                                      const Eigen::VectorXd& theta, double tol) {
  return pol.evaluate(theta, tol);
}

LpProblem ParametricLp::instantiate(const Eigen::VectorXd& theta) const {
  const int m_in = n_ineq();
  const int m_eq = static_cast<int>(e.size());
  LpProblem p = LpProblem::with_sizes(n_vars(), m_in + m_eq);
  p.objective = c;
  p.maximize = maximize;
  if (m_in > 0) {
    p.A.topRows(m_in) = G;
    p.rhs.head(m_in) = w;
    if (theta.size() > 0) p.rhs.head(m_in) += S * theta;
  }
  for (int k = 0; k < m_eq; ++k) {
    p.A.row(m_in + k) = E.row(k);
    p.relations[m_in + k] = Relation::Equal;
    p.rhs[m_in + k] = e[k] + (theta.size() > 0 ? T.row(k).dot(theta) : 0.0);
  }
  return p;
}

double ParametricLp::flow_value(double lp_objective, const Eigen::VectorXd& theta) const {
  return lp_objective + obj_const + (theta.size() > 0 ? obj_theta.dot(theta) : 0.0);
}

ParametricLp build_parametric(const ScreeningTemplate& tpl, const ParameterSet& ps) {
  const int nv = static_cast<int>(tpl.varying.size());
  if (ps.dim() != nv)
    throw ValidationError("parameter set dimension must match varying bus count");

  const LpProblem& lp = tpl.lp;
  const int n = lp.num_vars();
  int m_in = 0, m_eq = 0;
  for (Relation r : lp.relations) (r == Relation::Equal ? m_eq : m_in)++;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lp.lower[j])) ++m_in;
    if (std::isfinite(lp.upper[j])) ++m_in;
  }

  ParametricLp out;
  out.c = lp.objective;
  out.maximize = lp.maximize;
  out.G.setZero(m_in, n);
  out.w.resize(m_in);
  out.S.setZero(m_in, nv);
  out.E.setZero(m_eq, n);
  out.e.resize(m_eq);
  out.T.setZero(m_eq, nv);
  out.domain = ps;
  out.method = tpl.method;
  out.line = tpl.line;
  out.dir = tpl.dir;
  out.varying = tpl.varying;
  out.compare_limit = tpl.compare_limit;

  // Shift to absolute-theta form: rhs(theta) = (base - sens*theta0) + sens*theta.
  const Eigen::VectorXd shift =
      nv > 0 ? (tpl.rhs_sens * tpl.theta_base).eval() : Eigen::VectorXd::Zero(lp.num_constraints());
  out.obj_const = tpl.obj_base - (nv > 0 ? tpl.obj_sens.dot(tpl.theta_base) : 0.0);
  out.obj_theta = tpl.obj_sens;

  int gi = 0, ei = 0;
  for (int k = 0; k < lp.num_constraints(); ++k) {
    const double b0 = lp.rhs[k] - shift[k];
    switch (lp.relations[k]) {
      case Relation::LessEqual:
        out.G.row(gi) = lp.A.row(k);
        out.w[gi] = b0;
        out.S.row(gi) = tpl.rhs_sens.row(k);
        ++gi;
        break;
      case Relation::GreaterEqual:
        out.G.row(gi) = -lp.A.row(k);
        out.w[gi] = -b0;
        out.S.row(gi) = -tpl.rhs_sens.row(k);
        ++gi;
        break;
      case Relation::Equal:
        out.E.row(ei) = lp.A.row(k);
        out.e[ei] = b0;
        out.T.row(ei) = tpl.rhs_sens.row(k);
        ++ei;
        break;
    }
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(lp.lower[j])) {
      out.G(gi, j) = -1.0;
      out.w[gi] = -lp.lower[j];
      ++gi;
    }
    if (std::isfinite(lp.upper[j])) {
      out.G(gi, j) = 1.0;
      out.w[gi] = lp.upper[j];
      ++gi;
    }
  }
  return out;
}

namespace {

struct RegionBuildResult {
  bool ok = false;
  CriticalRegion region;
};

// Removes duplicate and redundant rows from {G theta <= g}; keeps the
// domain rows honest by re-solving a violation LP per row.
void reduce_region_rows(Eigen::MatrixXd& G, Eigen::VectorXd& g, const LpOptions& lopts) {
  normalize_rows(G, g);
  std::vector<int> keep;
  for (int i = 0; i < G.rows(); ++i) {
    bool dup = false;
    for (int k : keep) {
      if ((G.row(i) - G.row(k)).norm() < 1e-9 && std::abs(g[i] - g[k]) < 1e-9) {
        dup = true;
        break;
      }
      // Same normal, slacker offset: row i is dominated.
      if ((G.row(i) - G.row(k)).norm() < 1e-9 && g[i] >= g[k]) {
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(i);
  }

  std::vector<char> alive(keep.size(), 1);
  for (size_t i = 0; i < keep.size(); ++i) {
    // Maximize the candidate row over the others; redundant if it cannot
    // exceed its offset.
    int m_active = 0;
    for (size_t k = 0; k < keep.size(); ++k)
      if (alive[k] && k != i) ++m_active;
    if (m_active == 0) break;
    LpProblem p = LpProblem::with_sizes(static_cast<int>(G.cols()), m_active);
    int r = 0;
    for (size_t k = 0; k < keep.size(); ++k) {
      if (!alive[k] || k == i) continue;
      p.A.row(r) = G.row(keep[k]);
      p.rhs[r] = g[keep[k]];
      ++r;
    }
    p.objective = G.row(keep[i]).transpose();
    p.maximize = true;
    const LpSolution sol = solve_lp(p, lopts);
    if (sol.status == LpStatus::Optimal && sol.objective <= g[keep[i]] + 1e-9)
      alive[i] = 0;
  }

  int n_keep = 0;
  for (char a : alive) n_keep += a;
  Eigen::MatrixXd G2(n_keep, G.cols());
  Eigen::VectorXd g2(n_keep);
  int r = 0;
  for (size_t k = 0; k < keep.size(); ++k) {
    if (!alive[k]) continue;
    G2.row(r) = G.row(keep[k]);
    g2[r] = g[keep[k]];
    ++r;
  }
  G = std::move(G2);
  g = std::move(g2);
}

class RegionEnumerator {
 public:
  RegionEnumerator(const ParametricLp& plp, const MplpOptions& opts)
      : plp_(plp), opts_(opts), rng_(0x6d706c70) {}

  AffinePolicy run();

 private:
  RegionBuildResult try_build_region(const Eigen::VectorXd& seed);
  bool point_in_existing(const Eigen::VectorXd& theta) const;
  void push_facet_seeds(const CriticalRegion& region);

  const ParametricLp& plp_;
  MplpOptions opts_;
  AffinePolicy policy_;
  std::deque<Eigen::VectorXd> queue_;
  std::set<std::vector<int>> visited_;
  double extent_ = 1.0;
  std::mt19937_64 rng_;
};

AffinePolicy RegionEnumerator::run() {
  policy_.method = plp_.method;
  policy_.line = plp_.line;
  policy_.dir = plp_.dir;
  policy_.domain = plp_.domain;
  policy_.compare_limit = plp_.compare_limit;

  const int d = plp_.domain.dim();
  if (d == 0) {
    // No varying parameters: one constant region.
    const LpSolution sol = solve_lp(plp_.instantiate(Eigen::VectorXd()), opts_.lp);
    if (sol.status == LpStatus::Optimal) {
      CriticalRegion r;
      r.a_hat.resize(0);
      r.b_hat = plp_.flow_value(sol.objective, Eigen::VectorXd());
      r.chebyshev_center.resize(0);
      r.chebyshev_radius = kInf;
      policy_.regions.push_back(std::move(r));
    } else {
      ++policy_.uncovered_pockets;
    }
    return policy_;
  }

  Eigen::VectorXd box_lo, box_hi;
  plp_.domain.check_valid(box_lo, box_hi);
  extent_ = std::max(1e-12, (box_hi - box_lo).maxCoeff());

  Eigen::MatrixXd Hn = plp_.domain.H;
  Eigen::VectorXd hn = plp_.domain.h;
  normalize_rows(Hn, hn);
  Eigen::VectorXd center;
  chebyshev_center(Hn, hn, center, opts_.lp);
  queue_.push_back(center);

  while (!queue_.empty()) {
    if (static_cast<int>(policy_.regions.size()) >= opts_.region_cap) {
      policy_.overflow = true;
      break;
    }
    Eigen::VectorXd seed = queue_.front();
    queue_.pop_front();
    if (!plp_.domain.contains(seed, opts_.point_tol)) continue;
    if (point_in_existing(seed)) continue;

    RegionBuildResult built;
    Eigen::VectorXd trial = seed;
    for (int attempt = 0; attempt <= opts_.degeneracy_retries; ++attempt) {
      built = try_build_region(trial);
      if (built.ok) break;
      // Jitter and retry; stay inside the domain.
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      for (int tries = 0; tries < 16; ++tries) {
        Eigen::VectorXd delta(d);
        for (int i = 0; i < d; ++i) delta[i] = uni(rng_);
        trial = seed + opts_.jitter_rel * extent_ * delta;
        if (plp_.domain.contains(trial, 0.0)) break;
      }
    }
    if (!built.ok) {
      ++policy_.uncovered_pockets;
      continue;
    }
    if (visited_.count(built.region.active_set)) continue;
    visited_.insert(built.region.active_set);
    policy_.regions.push_back(built.region);
    push_facet_seeds(policy_.regions.back());
  }
  return policy_;
}

bool RegionEnumerator::point_in_existing(const Eigen::VectorXd& theta) const {
  // Strict interior test so boundary seeds still spawn the neighbor region.
  for (const CriticalRegion& r : policy_.regions)
    if (r.contains(theta, -opts_.point_tol)) return true;
  return false;
}

RegionBuildResult RegionEnumerator::try_build_region(const Eigen::VectorXd& seed) {
  RegionBuildResult out;
  const int n = plp_.n_vars();
  const int m_in = plp_.n_ineq();
  const int m_eq = static_cast<int>(plp_.e.size());

  const LpProblem lp = plp_.instantiate(seed);
  const LpSolution sol = solve_lp(lp, opts_.lp);
  if (sol.status != LpStatus::Optimal) return out;

  // Tight inequalities at the seed.
  const Eigen::VectorXd slack = plp_.w + plp_.S * seed - plp_.G * sol.x;
  std::vector<int> act;
  for (int k = 0; k < m_in; ++k) {
    if (std::abs(slack[k]) <= opts_.lp.tol.active_set * std::max(1.0, std::abs(plp_.w[k])))
      act.push_back(k);
  }
  if (static_cast<int>(act.size()) != n - m_eq) return out;  // degenerate seed

  // Square basis system [E; G_act] y = [e + T theta; w_act + S_act theta].
  Eigen::MatrixXd M(n, n);
  Eigen::MatrixXd rhs_theta(n, plp_.domain.dim());
  Eigen::VectorXd rhs_const(n);
  for (int k = 0; k < m_eq; ++k) {
    M.row(k) = plp_.E.row(k);
    rhs_const[k] = plp_.e[k];
    rhs_theta.row(k) = plp_.T.row(k);
  }
  for (size_t i = 0; i < act.size(); ++i) {
    M.row(m_eq + i) = plp_.G.row(act[i]);
    rhs_const[m_eq + i] = plp_.w[act[i]];
    rhs_theta.row(m_eq + i) = plp_.S.row(act[i]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) return out;
  const Eigen::VectorXd K0 = lu.solve(rhs_const);
  const Eigen::MatrixXd Kt = lu.solve(rhs_theta);

  // Multiplier check: the frozen basis must be optimal, i.e. the inequality
  // multipliers keep the right sign (they do not depend on theta for
  // rhs-parametric problems).
  const Eigen::VectorXd cc = plp_.maximize ? (-plp_.c).eval() : plp_.c;
  const Eigen::VectorXd mults = M.transpose().fullPivLu().solve(-cc);
  for (size_t i = 0; i < act.size(); ++i)
    if (mults[m_eq + i] < -1e-7) return out;

  // Parametric feasibility of the inactive rows defines the region.
  std::vector<int> inact;
  for (int k = 0; k < m_in; ++k)
    if (std::find(act.begin(), act.end(), k) == act.end()) inact.push_back(k);
  const int dom_rows = plp_.domain.num_rows();
  Eigen::MatrixXd G(static_cast<int>(inact.size()) + dom_rows, plp_.domain.dim());
  Eigen::VectorXd g(G.rows());
  for (size_t i = 0; i < inact.size(); ++i) {
    const int k = inact[i];
    G.row(i) = plp_.G.row(k) * Kt - plp_.S.row(k);
    g[i] = plp_.w[k] - plp_.G.row(k).dot(K0);
  }
  G.bottomRows(dom_rows) = plp_.domain.H;
  g.tail(dom_rows) = plp_.domain.h;

  // Drop numerically empty normals (constraints independent of theta).
  {
    std::vector<int> rows;
    for (int i = 0; i < G.rows(); ++i) {
      if (G.row(i).norm() > 1e-12) {
        rows.push_back(i);
      } else if (g[i] < -1e-9) {
        return out;  // theta-independent row violated: not a region
      }
    }
    Eigen::MatrixXd G2(static_cast<int>(rows.size()), G.cols());
    Eigen::VectorXd g2(G2.rows());
    for (size_t i = 0; i < rows.size(); ++i) {
      G2.row(i) = G.row(rows[i]);
      g2[i] = g[rows[i]];
    }
    G = std::move(G2);
    g = std::move(g2);
  }

  reduce_region_rows(G, g, opts_.lp);

  Eigen::VectorXd center;
  const double radius = chebyshev_center(G, g, center, opts_.lp);
  if (radius < opts_.full_dim_radius) return out;  // sliver: treat as uncovered

  CriticalRegion region;
  region.active_set = act;
  region.G = std::move(G);
  region.g = std::move(g);
  region.chebyshev_center = center;
  region.chebyshev_radius = radius;

  // Affine law of the optimal value, plus the forecast offset.
  const double sgn = plp_.maximize ? -1.0 : 1.0;  // internal min-sense value
  region.b_hat = sgn * cc.dot(K0) + plp_.obj_const;
  region.a_hat = sgn * (Kt.transpose() * cc) + plp_.obj_theta;

  // Audit the law against a direct solve at the region center.
  const LpSolution check = solve_lp(plp_.instantiate(center), opts_.lp);
  if (check.status != LpStatus::Optimal) return out;
  const double direct = plp_.flow_value(check.objective, center);
  const double lawval = region.a_hat.dot(center) + region.b_hat;
  if (std::abs(direct - lawval) > 1e-6 * std::max(1.0, std::abs(direct))) return out;

  out.ok = true;
  out.region = std::move(region);
  return out;
}

void RegionEnumerator::push_facet_seeds(const CriticalRegion& region) {
  const int d = plp_.domain.dim();
  const double eps = opts_.facet_step_rel * extent_;
  for (int i = 0; i < region.G.rows(); ++i) {
    // Relative-interior point of facet i: Chebyshev center within the facet.
    const int m = static_cast<int>(region.G.rows());
    LpProblem p = LpProblem::with_sizes(d + 1, m);
    int r = 0;
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      p.A.row(r).head(d) = region.G.row(k);
      p.A(r, d) = 1.0;
      p.rhs[r] = region.g[k];
      ++r;
    }
    p.A.row(m - 1).head(d) = region.G.row(i);
    p.relations[m - 1] = Relation::Equal;
    p.rhs[m - 1] = region.g[i];
    p.objective[d] = 1.0;
    p.maximize = true;
    p.upper[d] = 1e9;
    const LpSolution sol = solve_lp(p, opts_.lp);
    if (sol.status != LpStatus::Optimal || sol.objective < 1e-12) continue;
    const Eigen::VectorXd facet_point = sol.x.head(d);
    const Eigen::VectorXd stepped =
        facet_point + eps * region.G.row(i).transpose();
    if (!plp_.domain.contains(stepped, 0.0)) continue;  // leaves the domain
    if (point_in_existing(stepped)) continue;
    queue_.push_back(stepped);
  }
}

}  // namespace

AffinePolicy enumerate_regions(const ParametricLp& plp, const MplpOptions& opts) {
  RegionEnumerator e(plp, opts);
  return e.run();
}

AffinePolicy build_policy(const Network& net, const PtdfMatrix& ptdf,
                          const Forecast& fc, const ScreeningSpec& spec,
                          int line, Direction dir, const std::vector<int>& varying,
                          const ParameterSet& ps, const MplpOptions& opts) {
  const ScreeningTemplate tpl =
      make_screening_template(net, ptdf, fc, spec, line, dir, varying);
  const ParametricLp plp = build_parametric(tpl, ps);
  AffinePolicy pol = enumerate_regions(plp, opts);
  pol.base_load = fc.load;
  pol.varying_buses.clear();
  for (int v : varying) pol.varying_buses.push_back(net.buses[v]);
  return pol;
}

const AffinePolicy* PolicyStore::find(int line, Direction dir) const {
  for (const AffinePolicy& p : policies)
    if (p.line == line && p.dir == dir) return &p;
  return nullptr;
}

bool PolicyStore::any_overflow() const {
  for (const AffinePolicy& p : policies)
    if (p.overflow) return true;
  return false;
}

PolicyStore build_policy_store(const Network& net, const PtdfMatrix& ptdf,
                               const Forecast& fc, const ScreeningSpec& spec,
                               const std::vector<int>& varying_dense,
                               const ParameterSet& ps, const MplpOptions& opts,
                               int threads) {
  spec.validate(net);
  fc.validate(net);
  PolicyStore store;
  store.spec = spec;
  for (int v : varying_dense) store.varying_buses.push_back(net.buses.at(v));

  std::vector<int> lines;
  for (int j = 0; j < net.num_lines(); ++j)
    if (std::isfinite(net.branches[j].limit)) lines.push_back(j);

  std::vector<AffinePolicy> built(2 * lines.size());
  parallel_for(static_cast<int>(2 * lines.size()), threads, [&](int idx) {
    const int line = lines[idx / 2];
    const Direction dir = idx % 2 == 0 ? Direction::Upper : Direction::Lower;
    built[idx] = build_policy(net, ptdf, fc, spec, line, dir, varying_dense, ps, opts);
  });
  store.policies = std::move(built);
  return store;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int cols_hint = -1) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : std::max(0, cols_hint);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

nlohmann::json spec_to_json(const ScreeningSpec& spec) {
  nlohmann::json j;
  j["method"] = to_string(spec.method);
  if (spec.box) {
    j["box"] = {{"beta1", vector_to_json(spec.box->beta1)},
                {"beta2", vector_to_json(spec.box->beta2)},
                {"uncertain_nodes", spec.box->uncertain_nodes}};
    j["with_recourse"] = spec.with_recourse;
  }
  if (spec.gauss) {
    j["gaussian"] = {{"sigma2", vector_to_json(spec.gauss->sigma2)},
                     {"epsilon_x", spec.gauss->epsilon_x},
                     {"epsilon_f", spec.gauss->epsilon_f},
                     {"alpha", vector_to_json(spec.gauss->alpha)}};
  }
  return j;
}

ScreeningSpec spec_from_json(const nlohmann::json& j) {
  ScreeningSpec spec;
  const std::string m = j.at("method").get<std::string>();
  if (m == "S1") spec.method = Method::S1;
  else if (m == "S2") spec.method = Method::S2;
  else if (m == "S3") spec.method = Method::S3;
  else throw ParseError("unknown method tag: " + m);
  if (j.contains("box")) {
    BoxUncertainty b;
    b.beta1 = vector_from_json(j["box"]["beta1"]);
    b.beta2 = vector_from_json(j["box"]["beta2"]);
    b.uncertain_nodes = j["box"]["uncertain_nodes"].get<std::vector<int>>();
    spec.box = std::move(b);
    spec.with_recourse = j.value("with_recourse", false);
  }
  if (j.contains("gaussian")) {
    GaussianUncertainty g;
    g.sigma2 = vector_from_json(j["gaussian"]["sigma2"]);
    g.epsilon_x = j["gaussian"]["epsilon_x"].get<double>();
    g.epsilon_f = j["gaussian"]["epsilon_f"].get<double>();
    g.alpha = vector_from_json(j["gaussian"]["alpha"]);
    spec.gauss = std::move(g);
  }
  return spec;
}

}  // namespace

std::string store_to_json(const PolicyStore& store) {
  nlohmann::json doc;
  doc["schema"] = store.schema;
  doc["spec"] = spec_to_json(store.spec);
  doc["varying_buses"] = store.varying_buses;
  doc["policies"] = nlohmann::json::array();
  for (const AffinePolicy& p : store.policies) {
    nlohmann::json jp;
    jp["method"] = to_string(p.method);
    jp["line"] = p.line;
    jp["direction"] = to_string(p.dir);
    jp["varying_buses"] = p.varying_buses;
    jp["base_load"] = vector_to_json(p.base_load);
    jp["parameter_set"] = {{"H", matrix_to_json(p.domain.H)},
                           {"h", vector_to_json(p.domain.h)}};
    jp["compare_limit"] = p.compare_limit;
    jp["overflow"] = p.overflow;
    jp["uncovered_pockets"] = p.uncovered_pockets;
    jp["regions"] = nlohmann::json::array();
    for (const CriticalRegion& r : p.regions) {
      nlohmann::json jr;
      jr["G"] = matrix_to_json(r.G);
      jr["g"] = vector_to_json(r.g);
      jr["a_hat"] = vector_to_json(r.a_hat);
      jr["b_hat"] = r.b_hat;
      jr["active_set"] = r.active_set;
      jp["regions"].push_back(jr);
    }
    doc["policies"].push_back(jp);
  }
  return doc.dump();
}

PolicyStore store_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid policy store JSON: ") + e.what());
  }
  if (doc.value("schema", "") != "mplp-policy/1")
    throw ParseError("policy store schema tag mismatch (want mplp-policy/1)");
  PolicyStore store;
  store.spec = spec_from_json(doc.at("spec"));
  store.varying_buses = doc.at("varying_buses").get<std::vector<int>>();
  const int d = static_cast<int>(store.varying_buses.size());
  for (const auto& jp : doc.at("policies")) {
    AffinePolicy p;
    const std::string m = jp.at("method").get<std::string>();
    p.method = m == "S2" ? Method::S2 : (m == "S3" ? Method::S3 : Method::S1);
    p.line = jp.at("line").get<int>();
    p.dir = jp.at("direction").get<std::string>() == "lower" ? Direction::Lower
                                                             : Direction::Upper;
    p.varying_buses = jp.at("varying_buses").get<std::vector<int>>();
    p.base_load = vector_from_json(jp.at("base_load"));
    p.domain.H = matrix_from_json(jp.at("parameter_set").at("H"), d);
    p.domain.h = vector_from_json(jp.at("parameter_set").at("h"));
    p.compare_limit = jp.at("compare_limit").get<double>();
    p.overflow = jp.value("overflow", false);
    p.uncovered_pockets = jp.value("uncovered_pockets", 0);
    for (const auto& jr : jp.at("regions")) {
      CriticalRegion r;
      r.G = matrix_from_json(jr.at("G"), d);
      r.g = vector_from_json(jr.at("g"));
      r.a_hat = vector_from_json(jr.at("a_hat"));
      r.b_hat = jr.at("b_hat").get<double>();
      r.active_set = jr.at("active_set").get<std::vector<int>>();
      p.regions.push_back(std::move(r));
    }
    store.policies.push_back(std::move(p));
  }
  return store;
}

ScreeningResult hybrid_screen(const PolicyStore& store, const Network& net,
                              const PtdfMatrix& ptdf, const Forecast& fc,
                              const ScreeningOptions& opts, bool allow_lp_fallback) {
  fc.validate(net);
  const ScreeningSpec& spec = store.spec;
  spec.validate(net);
  const int nl = net.num_lines();
  ScreeningResult out;
  out.method = spec.method;
  out.records.resize(2 * nl);

  // Extract the varying-theta query once.
  std::vector<int> varying_dense;
  for (int bus_id : store.varying_buses) {
    const int idx = net.bus_index(bus_id);
    if (idx < 0) throw ValidationError("policy varying bus not in this network");
    varying_dense.push_back(idx);
  }
  Eigen::VectorXd theta(varying_dense.size());
  for (size_t i = 0; i < varying_dense.size(); ++i) theta[i] = fc.load[varying_dense[i]];

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

    const AffinePolicy* pol = store.find(line, dir);
    bool covered = false;
    double f_star = 0.0;
    if (pol && !pol->regions.empty()) {
      // The policy encodes the fixed buses in its constants; a query that
      // moved them silently invalidates the law, so fall back instead.
      bool base_ok = pol->base_load.size() == fc.load.size();
      if (base_ok) {
        for (int b = 0; b < net.num_buses() && base_ok; ++b) {
          const bool is_varying =
              std::find(varying_dense.begin(), varying_dense.end(), b) !=
              varying_dense.end();
          if (!is_varying &&
              std::abs(pol->base_load[b] - fc.load[b]) >
                  1e-9 * std::max(1.0, std::abs(pol->base_load[b])))
            base_ok = false;
        }
      }
      if (base_ok) {
        if (const auto v = pol->evaluate(theta)) {
          covered = true;
          f_star = *v;
        }
      }
    }

    if (covered) {
      rec.line = line;
      rec.dir = dir;
      rec.method = spec.method;
      rec.source = SolveSource::Policy;
      rec.f_star = f_star;
      rec.margin = (pol ? pol->compare_limit : limit) - std::abs(f_star);
      rec.redundant = rec.margin > opts.tol.redundancy * std::max(1.0, limit);
      return;
    }
    if (!allow_lp_fallback) {
      rec = BoundRecord{line, dir, false, std::nan(""), -kInf, spec.method,
                        SolveSource::Policy, "not covered by policy"};
      return;
    }
    // Direct LP fallback, identical to run_screening's per-bound path.
    if (spec.method == Method::S2) {
      const GaussianUncertainty& g = *spec.gauss;
      const double q_f = normal_quantile(1.0 - g.epsilon_f);
      const double tightened = limit - q_f * g.sigma_flow(net, ptdf)[line];
      if (tightened < 0.0) {
        rec = BoundRecord{line, dir, false, std::nan(""), tightened, spec.method,
                          SolveSource::Sentinel,
                          "tightened limit negative: structurally infeasible in M2"};
        return;
      }
    }
    const ScreeningTemplate tpl =
        make_screening_template(net, ptdf, fc, spec, line, dir, {});
    const LpSolution sol = solve_lp(tpl.lp, opts.lp);
    if (sol.status == LpStatus::Infeasible)
      throw ScreeningInfeasibleError("hybrid fallback LP infeasible for line " +
                                     std::to_string(line));
    if (sol.status == LpStatus::Stalled)
      throw std::runtime_error("hybrid fallback LP stalled");
    rec.line = line;
    rec.dir = dir;
    rec.method = spec.method;
    rec.source = SolveSource::Lp;
    if (sol.status == LpStatus::Unbounded) {
      rec.f_star = dir == Direction::Upper ? kInf : -kInf;
      rec.margin = -kInf;
      rec.redundant = false;
      return;
    }
    rec.f_star = tpl.flow_value(sol.objective, tpl.theta_base);
    rec.margin = tpl.compare_limit - std::abs(rec.f_star);
    rec.redundant = rec.margin > opts.tol.redundancy * std::max(1.0, limit);
  });

  out.validate(nl);
  return out;
}

}  // namespace ucscreen
