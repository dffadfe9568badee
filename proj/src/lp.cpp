#include "ucscreen/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ucscreen {

namespace {

// Nonbasic variables rest on a bound (or at zero when free).
enum class NonbasicState : unsigned char { AtLower, AtUpper, FreeZero };

// Internal computational form: min c.z  s.t.  M z = b,  lo <= z <= up,
// where z stacks [structural | row slack | row artificial]. Slacks encode
// the relation (<=: s >= 0, >=: s <= 0, =: s fixed at 0); artificials give
// the trivially feasible phase-1 start basis.
struct Tableau {
  int n_struct = 0;
  int n_rows = 0;
  Eigen::MatrixXd M;     // n_rows x n_total
  Eigen::VectorXd b;
  Eigen::VectorXd lo, up;
  Eigen::VectorXd cost;  // phase-2 costs (structural only; rest zero)

  int n_total() const { return static_cast<int>(M.cols()); }
  int slack(int row) const { return n_struct + row; }
  int artificial(int row) const { return n_struct + n_rows + row; }
};

class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& opts) : opts_(opts) { build(p); }

  LpSolution run(const LpProblem& p);

 private:
  void build(const LpProblem& p);
  void factorize();
  void compute_basic_values();
  double reduced_cost(int j, const Eigen::VectorXd& pi) const;
  bool price(const Eigen::VectorXd& c, int& enter, int& direction, bool bland);
  // Returns false when the step is unbounded.
  bool ratio_test(int enter, int direction, int& leave_pos, double& step,
                  bool& bound_flip);
  void pivot(int enter, int direction, int leave_pos, double step, bool bound_flip);
  // Runs simplex iterations on cost vector c; returns terminal status
  // (Optimal means "no improving direction").
  LpStatus iterate(const Eigen::VectorXd& c);

  Tableau t_;
  LpOptions opts_;
  std::vector<int> basis_;                 // column index per row
  std::vector<int> pos_in_basis_;          // column -> row or -1
  std::vector<NonbasicState> nb_state_;    // per column
  Eigen::VectorXd z_;                      // current values, all columns
  Eigen::MatrixXd binv_;                   // dense basis inverse
  int iterations_ = 0;
  int max_iterations_ = 0;
  int degenerate_run_ = 0;
  bool bland_ = false;
  int pivots_since_refactor_ = 0;
};

void Simplex::build(const LpProblem& p) {
  const int n = p.num_vars();
  const int m = p.num_constraints();
  t_.n_struct = n;
  t_.n_rows = m;
  const int total = n + 2 * m;
  t_.M.setZero(m, total);
  t_.M.leftCols(n) = p.A;
  t_.b = p.rhs;
  t_.lo.setConstant(total, 0.0);
  t_.up.setConstant(total, 0.0);
  t_.lo.head(n) = p.lower;
  t_.up.head(n) = p.upper;
  t_.cost.setZero(total);
  t_.cost.head(n) = p.maximize ? (-p.objective).eval() : p.objective;

  for (int k = 0; k < m; ++k) {
    t_.M(k, t_.slack(k)) = 1.0;
    switch (p.relations[k]) {
      case Relation::LessEqual:
        t_.lo[t_.slack(k)] = 0.0;
        t_.up[t_.slack(k)] = kInf;
        break;
      case Relation::GreaterEqual:
        t_.lo[t_.slack(k)] = -kInf;
        t_.up[t_.slack(k)] = 0.0;
        break;
      case Relation::Equal:
        t_.lo[t_.slack(k)] = 0.0;
        t_.up[t_.slack(k)] = 0.0;
        break;
    }
  }

  // Nonbasic start: finite bound nearest zero, or zero for free columns.
  nb_state_.assign(total, NonbasicState::AtLower);
  z_.setZero(total);
  for (int j = 0; j < n + m; ++j) {
    const double lo = t_.lo[j], up = t_.up[j];
    if (std::isfinite(lo) && (lo >= 0.0 || !std::isfinite(up))) {
      nb_state_[j] = NonbasicState::AtLower;
      z_[j] = lo;
    } else if (std::isfinite(up) && up <= 0.0) {
      nb_state_[j] = NonbasicState::AtUpper;
      z_[j] = up;
    } else if (std::isfinite(lo)) {
      nb_state_[j] = NonbasicState::AtLower;
      z_[j] = lo;
    } else {
      nb_state_[j] = NonbasicState::FreeZero;
      z_[j] = 0.0;
    }
  }

  // Artificial columns: signed identity so the start values are >= 0.
  Eigen::VectorXd residual = t_.b;
  for (int j = 0; j < n + m; ++j) {
    if (z_[j] != 0.0) residual -= t_.M.col(j) * z_[j];
  }
  basis_.resize(m);
  pos_in_basis_.assign(total, -1);
  for (int k = 0; k < m; ++k) {
    const int a = t_.artificial(k);
    t_.M(k, a) = residual[k] < 0.0 ? -1.0 : 1.0;
    t_.lo[a] = 0.0;
    t_.up[a] = kInf;
    basis_[k] = a;
    pos_in_basis_[a] = k;
    z_[a] = std::abs(residual[k]);
    nb_state_[a] = NonbasicState::AtLower;  // unused while basic
  }

  max_iterations_ = opts_.max_iterations > 0
                        ? opts_.max_iterations
                        : std::max(2000, 200 * (m + n));
  factorize();
}

void Simplex::factorize() {
  const int m = t_.n_rows;
  Eigen::MatrixXd B(m, m);
  for (int k = 0; k < m; ++k) B.col(k) = t_.M.col(basis_[k]);
  binv_ = B.partialPivLu().inverse();
  pivots_since_refactor_ = 0;
}

void Simplex::compute_basic_values() {
  Eigen::VectorXd rhs = t_.b;
  for (int j = 0; j < t_.n_total(); ++j) {
    if (pos_in_basis_[j] < 0 && z_[j] != 0.0) rhs -= t_.M.col(j) * z_[j];
  }
  const Eigen::VectorXd xb = binv_ * rhs;
  for (int k = 0; k < t_.n_rows; ++k) z_[basis_[k]] = xb[k];
}

bool Simplex::price(const Eigen::VectorXd& c, int& enter, int& direction, bool bland) {
  Eigen::VectorXd cb(t_.n_rows);
  for (int k = 0; k < t_.n_rows; ++k) cb[k] = c[basis_[k]];
  const Eigen::RowVectorXd pi = cb.transpose() * binv_;

  const double tol = opts_.tol.optimality;
  enter = -1;
  direction = 0;
  double best = tol;
  for (int j = 0; j < t_.n_total(); ++j) {
    if (pos_in_basis_[j] >= 0) continue;
    if (t_.lo[j] == t_.up[j]) continue;  // fixed column can never improve
    const double d = c[j] - pi.dot(t_.M.col(j));
    double viol = 0.0;
    int dir = 0;
    switch (nb_state_[j]) {
      case NonbasicState::AtLower:
        if (d < -tol) { viol = -d; dir = +1; }
        break;
      case NonbasicState::AtUpper:
        if (d > tol) { viol = d; dir = -1; }
        break;
      case NonbasicState::FreeZero:
        if (std::abs(d) > tol) { viol = std::abs(d); dir = d < 0.0 ? +1 : -1; }
        break;
    }
    if (dir == 0) continue;
    if (bland) { enter = j; direction = dir; return true; }
    if (viol > best) { best = viol; enter = j; direction = dir; }
  }
  return enter >= 0;
}

bool Simplex::ratio_test(int enter, int direction, int& leave_pos, double& step,
                         bool& bound_flip) {
  const Eigen::VectorXd w = binv_ * t_.M.col(enter);
  const double piv_tol = 1e-9;

  // The entering column stops at its own opposite bound.
  double flip_step = kInf;
  if (direction > 0 && std::isfinite(t_.up[enter]))
    flip_step = t_.up[enter] - z_[enter];
  else if (direction < 0 && std::isfinite(t_.lo[enter]))
    flip_step = z_[enter] - t_.lo[enter];

  double best = kInf;
  int best_pos = -1;
  for (int k = 0; k < t_.n_rows; ++k) {
    const double delta = direction * w[k];  // basic k moves by -delta * step
    if (std::abs(delta) <= piv_tol) continue;
    const int col = basis_[k];
    double limit;
    if (delta > 0.0) {
      limit = std::isfinite(t_.lo[col]) ? (z_[col] - t_.lo[col]) / delta : kInf;
    } else {
      limit = std::isfinite(t_.up[col]) ? (z_[col] - t_.up[col]) / delta : kInf;
    }
    if (limit < -1e-12) limit = 0.0;  // tiny infeasibility from roundoff
    if (limit < best - 1e-12 || (limit < best + 1e-12 && best_pos >= 0 &&
                                 basis_[k] < basis_[best_pos])) {
      best = std::max(limit, 0.0);
      best_pos = k;
    }
  }

  if (best_pos < 0 && !std::isfinite(flip_step)) return false;  // unbounded ray
  if (flip_step <= best) {
    bound_flip = true;
    step = flip_step;
    leave_pos = -1;
  } else {
    bound_flip = false;
    step = best;
    leave_pos = best_pos;
  }
  return true;
}

void Simplex::pivot(int enter, int direction, int leave_pos, double step,
                    bool bound_flip) {
  const Eigen::VectorXd w = binv_ * t_.M.col(enter);
  // Move current point along the edge.
  z_[enter] += direction * step;
  for (int k = 0; k < t_.n_rows; ++k) z_[basis_[k]] -= direction * step * w[k];

  if (bound_flip) {
    nb_state_[enter] =
        direction > 0 ? NonbasicState::AtUpper : NonbasicState::AtLower;
    return;
  }

  const int leave = basis_[leave_pos];
  // Snap the leaving variable onto the bound it hit.
  const double delta = direction * w[leave_pos];
  z_[leave] = delta > 0.0 ? t_.lo[leave] : t_.up[leave];
  nb_state_[leave] = delta > 0.0 ? NonbasicState::AtLower : NonbasicState::AtUpper;
  if (!std::isfinite(z_[leave])) {  // free column leaving: park at zero
    z_[leave] = 0.0;
    nb_state_[leave] = NonbasicState::FreeZero;
  }

  basis_[leave_pos] = enter;
  pos_in_basis_[enter] = leave_pos;
  pos_in_basis_[leave] = -1;

  // Product-form update of the dense inverse.
  const double piv = w[leave_pos];
  Eigen::RowVectorXd brow = binv_.row(leave_pos) / piv;
  for (int k = 0; k < t_.n_rows; ++k) {
    if (k == leave_pos) continue;
    binv_.row(k) -= w[k] * brow;
  }
  binv_.row(leave_pos) = brow;

  if (++pivots_since_refactor_ >= 64) {
    factorize();
    compute_basic_values();
  }
}

LpStatus Simplex::iterate(const Eigen::VectorXd& c) {
  while (true) {
    if (iterations_ >= max_iterations_) return LpStatus::Stalled;
    int enter, direction;
    if (!price(c, enter, direction, bland_)) return LpStatus::Optimal;
    int leave_pos;
    double step;
    bool flip;
    if (!ratio_test(enter, direction, leave_pos, step, flip))
      return LpStatus::Unbounded;
    pivot(enter, direction, leave_pos, step, flip);
    ++iterations_;
    if (step < 1e-12) {
      if (++degenerate_run_ >= opts_.stall_switch) bland_ = true;
    } else {
      degenerate_run_ = 0;
    }
  }
}

LpSolution Simplex::run(const LpProblem& p) {
  LpSolution sol;
  const int m = t_.n_rows;
  const int n = t_.n_struct;

  // Phase 1: drive artificials to zero.
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(t_.n_total());
  c1.tail(m).setOnes();
  LpStatus s1 = iterate(c1);
  if (s1 == LpStatus::Stalled) { sol.status = LpStatus::Stalled; return sol; }
  double infeas = 0.0;
  for (int k = 0; k < m; ++k) infeas += z_[t_.artificial(k)];
  if (infeas > opts_.tol.feasibility * std::max(1.0, t_.b.cwiseAbs().maxCoeff())) {
    sol.status = LpStatus::Infeasible;
    sol.iterations = iterations_;
    return sol;
  }
  // Pin artificials at zero for phase 2.
  for (int k = 0; k < m; ++k) {
    const int a = t_.artificial(k);
    t_.up[a] = 0.0;
    if (pos_in_basis_[a] < 0) { z_[a] = 0.0; nb_state_[a] = NonbasicState::AtLower; }
  }
  factorize();
  compute_basic_values();

  // Phase 2.
  bland_ = false;
  degenerate_run_ = 0;
  LpStatus s2 = iterate(t_.cost);
  if (s2 == LpStatus::Stalled || s2 == LpStatus::Unbounded) {
    sol.status = s2;
    sol.iterations = iterations_;
    return sol;
  }

  // Certify before reporting Optimal.
  factorize();
  compute_basic_values();
  sol.x = z_.head(n);
  double obj_min = t_.cost.head(n).dot(sol.x);
  sol.objective = p.maximize ? -obj_min : obj_min;
  sol.iterations = iterations_;

  Eigen::VectorXd cb(m);
  for (int k = 0; k < m; ++k) cb[k] = t_.cost[basis_[k]];
  Eigen::VectorXd pi = (cb.transpose() * binv_).transpose();
  if (p.maximize) pi = -pi;
  sol.duals = pi;

  // Primal residual check.
  const Eigen::VectorXd row_vals = p.A * sol.x;
  double scale = std::max(1.0, p.rhs.cwiseAbs().maxCoeff());
  for (int k = 0; k < m; ++k) {
    const double r = row_vals[k] - p.rhs[k];
    const bool bad = (p.relations[k] == Relation::Equal && std::abs(r) > opts_.tol.feasibility * scale) ||
                     (p.relations[k] == Relation::LessEqual && r > opts_.tol.feasibility * scale) ||
                     (p.relations[k] == Relation::GreaterEqual && r < -opts_.tol.feasibility * scale);
    if (bad) { sol.status = LpStatus::Stalled; return sol; }
  }
  for (int j = 0; j < n; ++j) {
    if (sol.x[j] < p.lower[j] - opts_.tol.feasibility * scale ||
        sol.x[j] > p.upper[j] + opts_.tol.feasibility * scale) {
      sol.status = LpStatus::Stalled;
      return sol;
    }
  }

  sol.active_rows.clear();
  for (int k = 0; k < m; ++k) {
    if (std::abs(row_vals[k] - p.rhs[k]) <= opts_.tol.active_set * std::max(1.0, std::abs(p.rhs[k])))
      sol.active_rows.push_back(k);
  }
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace

void LpProblem::validate() const {
  const int n = num_vars();
  const int m = num_constraints();
  if (n < 1) throw ValidationError("LP needs at least one variable");
  if (A.rows() != m || A.cols() != n)
    throw ValidationError("constraint matrix shape mismatch");
  if (static_cast<int>(relations.size()) != m)
    throw ValidationError("relation count mismatch");
  if (lower.size() != n || upper.size() != n)
    throw ValidationError("bound vector length mismatch");
  if (!objective.allFinite()) throw ValidationError("non-finite objective coefficient");
  if (!A.allFinite()) throw ValidationError("non-finite constraint coefficient");
  if (!rhs.allFinite()) throw ValidationError("non-finite rhs");
  for (int j = 0; j < n; ++j)
    if (lower[j] > upper[j]) throw ValidationError("variable bound lower > upper");
}

LpProblem LpProblem::with_sizes(int n_vars, int n_rows) {
  LpProblem p;
  p.objective.setZero(n_vars);
  p.lower.setConstant(n_vars, -kInf);
  p.upper.setConstant(n_vars, kInf);
  p.A.setZero(n_rows, n_vars);
  p.relations.assign(n_rows, Relation::LessEqual);
  p.rhs.setZero(n_rows);
  return p;
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::Stalled: return "stalled";
  }
  return "?";
}

LpSolution solve_lp(const LpProblem& p, const LpOptions& opts) {
  p.validate();
  Simplex s(p, opts);
  return s.run(p);
}

std::vector<int> active_set(const LpProblem& p, const LpSolution& sol, double tol) {
  std::vector<int> out;
  if (sol.status != LpStatus::Optimal) return out;
  const int m = p.num_constraints();
  const Eigen::VectorXd row_vals = p.A * sol.x;
  for (int k = 0; k < m; ++k) {
    if (std::abs(row_vals[k] - p.rhs[k]) <= tol * std::max(1.0, std::abs(p.rhs[k])))
      out.push_back(k);
  }
  for (int j = 0; j < p.num_vars(); ++j) {
    if (std::isfinite(p.lower[j]) && std::abs(sol.x[j] - p.lower[j]) <= tol)
      out.push_back(m + 2 * j);
    if (std::isfinite(p.upper[j]) && std::abs(sol.x[j] - p.upper[j]) <= tol)
      out.push_back(m + 2 * j + 1);
  }
  return out;
}

}  // namespace ucscreen
