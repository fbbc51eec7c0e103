#include "debulk/optimizer.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace debulk {

using Eigen::VectorXd;

void SolverConfig::check() const {
  if (max_iterations < 1 || max_outer_iterations < 1) throw Error("solver config: iteration limits must be >= 1");
  if (!(constraint_tol > 0.0) || !(stationarity_tol > 0.0)) throw Error("solver config: tolerances must be > 0");
  if (!(initial_penalty > 0.0) || !(penalty_growth > 1.0) || !(max_penalty >= initial_penalty)) {
    throw Error("solver config: bad penalty schedule");
  }
  if (lbfgs_memory < 1) throw Error("solver config: lbfgs_memory must be >= 1");
  if (load_steps < 1) throw Error("solver config: load_steps must be >= 1");
}

// ---------------------------------------------------------------------------
// L-BFGS

namespace {

using Fun = std::function<double(const VectorXd&, VectorXd&)>;

struct LineSearch {
  double alpha = 0.0;
  double f = 0.0;
  VectorXd x;
  VectorXd g;
  bool ok = false;
};

double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  const double lo = std::min(a, b), hi = std::max(a, b), w = hi - lo;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = (b > a ? 1.0 : -1.0) * std::sqrt(disc);
    const double den = db - da + 2.0 * d2;
    if (std::abs(den) > 0.0) {
      const double c = b - (b - a) * (db + d2 - d1) / den;
      if (std::isfinite(c)) t = c;
    }
  }
  return std::clamp(t, lo + 0.1 * w, hi - 0.1 * w);
}

LineSearch strong_wolfe(const Fun& fun, const VectorXd& x, double f0, const VectorXd& g0, const VectorXd& d,
                        double alpha0, int& evals) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  const double dphi0 = g0.dot(d);
  LineSearch best;
  best.f = f0;
  const auto eval = [&](double a, LineSearch& out) {
    out.alpha = a;
    out.x = x + a * d;
    out.f = fun(out.x, out.g);
    ++evals;
    if (std::isfinite(out.f) && out.f < best.f) {
      best = out;
      best.ok = true;
    }
    return out.g.dot(d);
  };
  // Approximate Wolfe (Hager-Zhang): once f is flat to roundoff, judge decrease by the slope.
  const double flat = 1e-9 * std::max(1.0, std::abs(f0));
  const auto insufficient = [&](double a, double f, double da, double fref) {
    if (!std::isfinite(f)) return true;
    if (std::abs(f - f0) <= flat && da <= -(1.0 - 2.0 * c1) * dphi0) return false;
    return f > f0 + c1 * a * dphi0 || f >= fref;
  };
  const auto zoom = [&](double lo, double hi, double flo, double fhi, double dlo, double dhi) {
    LineSearch cur;
    for (int j = 0; j < 30; ++j) {
      const double a = cubic_min(lo, flo, dlo, hi, fhi, dhi);
      const double da = eval(a, cur);
      if (insufficient(a, cur.f, da, flo)) {
        hi = a;
        fhi = std::isfinite(cur.f) ? cur.f : std::numeric_limits<double>::max();
        dhi = std::isfinite(da) ? da : 0.0;
      } else {
        if (std::abs(da) <= -c2 * dphi0) {
          cur.ok = true;
          return cur;
        }
        if (da * (hi - lo) >= 0.0) {
          hi = lo;
          fhi = flo;
          dhi = dlo;
        }
        lo = a;
        flo = cur.f;
        dlo = da;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return best;  // sufficient decrease without curvature, or failure
  };

  double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
  double a = alpha0;
  LineSearch cur;
  for (int i = 0; i < 40; ++i) {
    const double da = eval(a, cur);
    if (!std::isfinite(cur.f)) {
      a = 0.5 * (a_prev + a);
      continue;
    }
    if (insufficient(a, cur.f, da, i > 0 ? f_prev : std::numeric_limits<double>::infinity())) {
      return zoom(a_prev, a, f_prev, cur.f, d_prev, da);
    }
    if (std::abs(da) <= -c2 * dphi0) {
      cur.ok = true;
      return cur;
    }
    if (da >= 0.0) return zoom(a, a_prev, cur.f, f_prev, da, d_prev);
    a_prev = a;
    f_prev = cur.f;
    d_prev = da;
    a *= 2.0;
  }
  return best;
}

}  // namespace

UnconstrainedResult minimize_lbfgs(const Fun& fun, const VectorXd& x0, double grad_tol, int max_iterations,
                                   int memory, const LbfgsPreconditioner* pre) {
  UnconstrainedResult r;
  r.x = x0;
  VectorXd g;
  r.f = fun(r.x, g);
  r.evaluations = 1;
  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  int stalls = 0;
  double best_grad = std::numeric_limits<double>::infinity();
  bool preconditioned = false;
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    r.grad_inf = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
    if (r.grad_inf <= grad_tol) break;
    if (pre && r.iterations % std::max(pre->refresh_every, 1) == 0) {
      preconditioned = pre->refresh(r.x);
      S.clear();
      Y.clear();
      rho.clear();
    }
    // Two-loop recursion.
    VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    VectorXd d;
    if (preconditioned) {
      d = pre->apply(q);
    } else {
      double gamma = 1.0;
      if (!S.empty()) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
      d = gamma * q;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(d);
      d += (alpha[i] - beta) * S[i];
    }
    d = -d;
    if (g.dot(d) >= 0.0) {
      S.clear();
      Y.clear();
      rho.clear();
      d = preconditioned ? VectorXd(-pre->apply(g)) : VectorXd(-g);
      if (g.dot(d) >= 0.0) d = -g;
    }
    const double a0 = (S.empty() && !preconditioned) ? std::min(1.0, 1.0 / std::max(r.grad_inf, 1e-300)) : 1.0;
    LineSearch ls = strong_wolfe(fun, r.x, r.f, g, d, a0, r.evaluations);
    if (!ls.ok) {
      if (S.empty() && !preconditioned) break;
      if (S.empty()) preconditioned = false;
      S.clear();
      Y.clear();
      rho.clear();
      continue;
    }
    const VectorXd s = ls.x - r.x;
    const VectorXd yv = ls.g - g;
    const double sy = s.dot(yv);
    const double df = r.f - ls.f;
    r.x = ls.x;
    g = ls.g;
    r.f = ls.f;
    if (sy > 1e-14 * s.norm() * yv.norm()) {
      S.push_back(s);
      Y.push_back(yv);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    const double gi = g.lpNorm<Eigen::Infinity>();
    if (df <= 1e-16 * std::max(1.0, std::abs(r.f)) && gi >= 0.99 * best_grad) {
      if (++stalls >= 10) break;
    } else {
      stalls = 0;
    }
    best_grad = std::min(best_grad, gi);
  }
  r.grad_inf = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Augmented Lagrangian

AugLagResult minimize_augmented_lagrangian(const ConstrainedProblem& problem, const VectorXd& y0,
                                           const SolverConfig& cfg, double feasibility_tol) {
  cfg.check();
  const Eigen::Index ne = problem.num_equalities();
  const Eigen::Index ni = problem.num_inequalities();
  AugLagResult res;
  res.y = y0;
  res.eq_multipliers = VectorXd::Zero(ne);
  res.ineq_multipliers = VectorXd::Zero(ni);
  double penalty = cfg.initial_penalty;
  VectorXd eq(ne), in(ni);

  const auto lagrangian = [&](const VectorXd& y, VectorXd& grad) {
    double f = problem.objective(y, grad);
    problem.constraints(y, eq, in);
    VectorXd weq = res.eq_multipliers + penalty * eq;
    VectorXd win = (res.ineq_multipliers + penalty * in).cwiseMax(0.0);
    f += res.eq_multipliers.dot(eq) + 0.5 * penalty * eq.squaredNorm();
    f += (win.squaredNorm() - res.ineq_multipliers.squaredNorm()) / (2.0 * penalty);
    problem.add_jacobian_transpose(y, weq, win, grad);
    return f;
  };

  const auto measure = [&](const VectorXd& y) {
    problem.constraints(y, eq, in);
    const double meq = ne ? eq.lpNorm<Eigen::Infinity>() : 0.0;
    const double mviol = ni ? std::max(0.0, in.maxCoeff()) : 0.0;
    return std::pair{meq, mviol};
  };

  using SpMat = Eigen::SparseMatrix<double>;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  LbfgsPreconditioner pre;
  pre.refresh = [&](const VectorXd& y) {
    SpMat je, ji;
    if (!problem.jacobian(y, je, ji)) return false;
    problem.constraints(y, eq, in);
    const VectorXd weq = res.eq_multipliers + penalty * eq;
    std::vector<Eigen::Triplet<double>> trip;
    problem.add_curvature(y, weq, trip);
    const Eigen::Index n = y.size();
    const double floor = problem.curvature_floor();
    for (Eigen::Index k = 0; k < n; ++k) trip.emplace_back(k, k, floor);
    SpMat m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    if (ne) m += penalty * SpMat(je.transpose() * je);
    if (ni) {
      // Rows of active or violated contacts only.
      VectorXd act(ni);
      for (Eigen::Index j = 0; j < ni; ++j) act[j] = (res.ineq_multipliers[j] + penalty * in[j] > 0.0) ? 1.0 : 0.0;
      const SpMat ja = SpMat(act.asDiagonal() * ji).pruned();
      m += penalty * SpMat(ja.transpose() * ja);
    }
    ldlt.compute(m);
    return ldlt.info() == Eigen::Success;
  };
  pre.apply = [&](const VectorXd& g) -> VectorXd { return ldlt.solve(g); };

  // First-order residual at a feasible point from least-squares multipliers on the
  // active set; inequality rows with negative estimates are dropped and the fit redone.
  const auto kkt_residual = [&](const VectorXd& y) {
    SpMat je, ji;
    if (!problem.jacobian(y, je, ji)) return std::numeric_limits<double>::infinity();
    VectorXd g;
    problem.objective(y, g);
    problem.constraints(y, eq, in);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index j = 0; j < ni; ++j) {
      if (in[j] > -feasibility_tol) rows.push_back(j);
    }
    double r = std::numeric_limits<double>::infinity();
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<Eigen::Triplet<double>> trip;
      for (int k = 0; k < je.outerSize(); ++k) {
        for (SpMat::InnerIterator it(je, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
      }
      std::vector<Eigen::Index> pick(static_cast<std::size_t>(ni), -1);
      for (std::size_t a = 0; a < rows.size(); ++a) pick[static_cast<std::size_t>(rows[a])] = ne + static_cast<Eigen::Index>(a);
      for (int k = 0; k < ji.outerSize(); ++k) {
        for (SpMat::InnerIterator it(ji, k); it; ++it) {
          const Eigen::Index to = pick[static_cast<std::size_t>(it.row())];
          if (to >= 0) trip.emplace_back(to, it.col(), it.value());
        }
      }
      SpMat ja(ne + static_cast<Eigen::Index>(rows.size()), y.size());
      ja.setFromTriplets(trip.begin(), trip.end());
      SpMat m = ja * SpMat(ja.transpose());
      for (Eigen::Index k = 0; k < m.rows(); ++k) m.coeffRef(k, k) += 1e-12;
      Eigen::SimplicialLDLT<SpMat> f(m);
      if (f.info() != Eigen::Success) break;
      const VectorXd lambda = f.solve(-(ja * g));
      r = (g + ja.transpose() * lambda).lpNorm<Eigen::Infinity>();
      std::vector<Eigen::Index> kept;
      for (std::size_t a = 0; a < rows.size(); ++a) {
        if (lambda[ne + static_cast<Eigen::Index>(a)] >= 0.0) kept.push_back(rows[a]);
      }
      if (kept.size() == rows.size()) break;
      rows = std::move(kept);
      r = std::numeric_limits<double>::infinity();
    }
    return r;
  };

  double omega = 1e-2;
  double prev_viol = std::numeric_limits<double>::infinity();
  int inner_budget = cfg.max_iterations;
  for (res.outer_iterations = 1; res.outer_iterations <= cfg.max_outer_iterations; ++res.outer_iterations) {
    const double inner_tol = std::max(omega, 0.5 * cfg.stationarity_tol);
    // each inner solve gets at most an eighth of the budget
    const int inner_cap = std::clamp(cfg.max_iterations / 8, 1, std::max(inner_budget, 1));
    const auto ur = minimize_lbfgs(lagrangian, res.y, inner_tol, inner_cap, cfg.lbfgs_memory, &pre);
    res.y = ur.x;
    res.inner_iterations += ur.iterations;
    res.function_evaluations += ur.evaluations;
    inner_budget -= ur.iterations;

    const auto [meq, mviol] = measure(res.y);
    // Complementarity-aware violation before the multiplier update.
    double comp = 0.0;
    for (Eigen::Index j = 0; j < ni; ++j) {
      comp = std::max(comp, std::abs(std::min(-in[j], res.ineq_multipliers[j] / penalty)));
    }
    const double viol = std::max(meq, comp);
    res.eq_multipliers += penalty * eq;
    res.ineq_multipliers = (res.ineq_multipliers + penalty * in).cwiseMax(0.0);

    VectorXd gtmp;
    res.objective = problem.objective(res.y, gtmp);
    ++res.function_evaluations;
    res.max_eq = meq;
    res.max_violation = mviol;
    res.stationarity = ur.grad_inf;
    if (cfg.trace) cfg.trace(res.outer_iterations, res.objective, meq, mviol, ur.grad_inf);

    if (meq <= feasibility_tol && mviol <= feasibility_tol) {
      if (ur.grad_inf > cfg.stationarity_tol) res.stationarity = std::min(ur.grad_inf, kkt_residual(res.y));
      if (res.stationarity <= cfg.stationarity_tol) {
        res.converged = true;
        break;
      }
    }
    if (inner_budget <= 0) break;
    if (viol > feasibility_tol && viol > 0.25 * prev_viol) penalty = std::min(penalty * cfg.penalty_growth, cfg.max_penalty);
    prev_viol = std::min(prev_viol, viol);
    omega = std::max(0.1 * omega, 0.5 * cfg.stationarity_tol);
  }
  if (res.outer_iterations > cfg.max_outer_iterations) res.outer_iterations = cfg.max_outer_iterations;
  return res;
}

// ---------------------------------------------------------------------------
// Debulk problem

namespace {

inline double ref_z_m(const ReferenceSurface& ref, double x, double y) { return ref.eval(x * 1e3, y * 1e3) * 1e-3; }

class DebulkProblem final : public ConstrainedProblem {
 public:
  DebulkProblem(const EnergyModel& model, const ReferenceSurface& ref, const VectorXd& X_ini)
      : model_(model), ref_(ref), X_ini_(X_ini) {
    length_ = model.spacing;
    energy_ = model.nodal_pressure_force() + model.nodal_mass() * model.mat.g;
    if (!(energy_ > 0.0)) energy_ = model.mat.bending_rigidity() / length_;
    energy_ *= length_;
    // Shear and bending stiffness for a unit (one-spacing) nodal displacement.
    const double half = 0.5 * length_;
    floor_ = std::max(1e-6, (model.mat.G * half * half * model.mat.t + model.mat.bending_rigidity()) / energy_);
    var_of_.assign(model.size(), -1);
    for (std::size_t i = 0; i < model.size(); ++i) {
      if (model.node_class[i] != NodeClass::fixed_boundary) {
        var_of_[i] = static_cast<int>(free_.size());
        free_.push_back(static_cast<int>(i));
      }
    }
    for (const auto& [a, b] : model.edges) {
      if (var_of_[static_cast<std::size_t>(a)] >= 0 || var_of_[static_cast<std::size_t>(b)] >= 0) edges_.emplace_back(a, b);
    }
  }

  Eigen::Index num_variables() const override { return 3 * static_cast<Eigen::Index>(free_.size()); }
  Eigen::Index num_equalities() const override { return static_cast<Eigen::Index>(edges_.size()); }
  Eigen::Index num_inequalities() const override { return static_cast<Eigen::Index>(free_.size()); }
  double length_scale() const { return length_; }

  VectorXd to_X(const VectorXd& y) const {
    VectorXd X = X_ini_;
    for (std::size_t v = 0; v < free_.size(); ++v) {
      X.segment<3>(3 * free_[v]) += length_ * y.segment<3>(3 * static_cast<Eigen::Index>(v));
    }
    return X;
  }

  double objective(const VectorXd& y, VectorXd& grad) const override {
    const VectorXd X = to_X(y);
    const double pi = total_potential(model_, X, X_ini_, gfull_);
    grad.resize(num_variables());
    const double s = length_ / energy_;
    for (std::size_t v = 0; v < free_.size(); ++v) {
      grad.segment<3>(3 * static_cast<Eigen::Index>(v)) = s * gfull_.segment<3>(3 * free_[v]);
    }
    return pi / energy_;
  }

  void constraints(const VectorXd& y, VectorXd& eq, VectorXd& ineq) const override {
    const VectorXd X = to_X(y);
    eq.resize(num_equalities());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      eq[static_cast<Eigen::Index>(e)] = ((X.segment<3>(3 * a) - X.segment<3>(3 * b)).norm() - model_.spacing) / length_;
    }
    ineq.resize(num_inequalities());
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const auto k = 3 * free_[v];
      ineq[static_cast<Eigen::Index>(v)] = (ref_z_m(ref_, X[k], X[k + 1]) - X[k + 2]) / length_;
    }
  }

  void add_jacobian_transpose(const VectorXd& y, const VectorXd& w_eq, const VectorXd& w_in,
                              VectorXd& grad) const override {
    const VectorXd X = to_X(y);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double w = w_eq[static_cast<Eigen::Index>(e)];
      if (w == 0.0) continue;
      const auto [a, b] = edges_[e];
      const Vec3 d = X.segment<3>(3 * a) - X.segment<3>(3 * b);
      const Vec3 u = d / d.norm();
      const int va = var_of_[static_cast<std::size_t>(a)], vb = var_of_[static_cast<std::size_t>(b)];
      if (va >= 0) grad.segment<3>(3 * va) += w * u;
      if (vb >= 0) grad.segment<3>(3 * vb) -= w * u;
    }
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const double w = w_in[static_cast<Eigen::Index>(v)];
      if (w == 0.0) continue;
      const auto k = 3 * free_[v];
      // Semi-analytic: bilinear cell gradient in x, y; exact in z.
      const auto s = ref_.sample(X[k] * 1e3, X[k + 1] * 1e3);
      grad.segment<3>(3 * static_cast<Eigen::Index>(v)) += w * Vec3(s.dzdx, s.dzdy, -1.0);
    }
  }

  bool jacobian(const VectorXd& y, Eigen::SparseMatrix<double>& je, Eigen::SparseMatrix<double>& ji) const override {
    const VectorXd X = to_X(y);
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      const Vec3 d = X.segment<3>(3 * a) - X.segment<3>(3 * b);
      const Vec3 u = d / d.norm();
      const int va = var_of_[static_cast<std::size_t>(a)], vb = var_of_[static_cast<std::size_t>(b)];
      for (int k = 0; k < 3; ++k) {
        if (va >= 0) t.emplace_back(static_cast<int>(e), 3 * va + k, u[k]);
        if (vb >= 0) t.emplace_back(static_cast<int>(e), 3 * vb + k, -u[k]);
      }
    }
    je.resize(num_equalities(), num_variables());
    je.setFromTriplets(t.begin(), t.end());
    t.clear();
    for (std::size_t v = 0; v < free_.size(); ++v) {
      const auto k = 3 * free_[v];
      const auto s = ref_.sample(X[k] * 1e3, X[k + 1] * 1e3);
      const int row = static_cast<int>(v), col = 3 * static_cast<int>(v);
      t.emplace_back(row, col, s.dzdx);
      t.emplace_back(row, col + 1, s.dzdy);
      t.emplace_back(row, col + 2, -1.0);
    }
    ji.resize(num_inequalities(), num_variables());
    ji.setFromTriplets(t.begin(), t.end());
    return true;
  }

  void add_curvature(const VectorXd& y, const VectorXd& w_eq, std::vector<Eigen::Triplet<double>>& out) const override {
    const VectorXd X = to_X(y);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const double w = w_eq[static_cast<Eigen::Index>(e)];
      if (!(w > 0.0)) continue;
      const auto [a, b] = edges_[e];
      const Vec3 d = (X.segment<3>(3 * a) - X.segment<3>(3 * b)) / length_;
      const double len = d.norm();
      const Eigen::Matrix3d h = w / len * (Eigen::Matrix3d::Identity() - d * d.transpose() / (len * len));
      const int va = var_of_[static_cast<std::size_t>(a)], vb = var_of_[static_cast<std::size_t>(b)];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          if (va >= 0) out.emplace_back(3 * va + r, 3 * va + c, h(r, c));
          if (vb >= 0) out.emplace_back(3 * vb + r, 3 * vb + c, h(r, c));
          if (va >= 0 && vb >= 0) {
            out.emplace_back(3 * va + r, 3 * vb + c, -h(r, c));
            out.emplace_back(3 * vb + r, 3 * va + c, -h(r, c));
          }
        }
      }
    }
  }

  double curvature_floor() const override { return floor_; }

 private:
  const EnergyModel& model_;
  const ReferenceSurface& ref_;
  VectorXd X_ini_;
  double length_ = 1.0;
  double energy_ = 1.0;
  double floor_ = 1.0;
  std::vector<int> var_of_;
  std::vector<int> free_;
  std::vector<std::pair<int, int>> edges_;
  mutable VectorXd gfull_;
};

}  // namespace

Residuals constraint_residuals(const PlyNet& net, const VectorXd& X, const ReferenceSurface& ref) {
  Residuals r;
  const double spacing = net.spacing * 1e-3;
  for (const auto& [a, b] : net.edges) {
    const bool both_fixed = net.node_class[static_cast<std::size_t>(a)] == NodeClass::fixed_boundary &&
                            net.node_class[static_cast<std::size_t>(b)] == NodeClass::fixed_boundary;
    if (both_fixed) continue;
    const double len = (X.segment<3>(3 * a) - X.segment<3>(3 * b)).norm();
    r.max_equality = std::max(r.max_equality, std::abs(len - spacing));
  }
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (net.node_class[i] == NodeClass::fixed_boundary) continue;
    const auto k = 3 * static_cast<Eigen::Index>(i);
    r.max_penetration = std::max(r.max_penetration, ref_z_m(ref, X[k], X[k + 1]) - X[k + 2]);
  }
  return r;
}

SolveResult solve(const PlyNet& net, const MaterialParams& mat, const ReferenceSurface& ref, const SolverConfig& cfg) {
  cfg.check();
  const auto t0 = std::chrono::steady_clock::now();
  const EnergyModel model = EnergyModel::from_net(net, mat);
  SolveResult out;
  VectorXd X_ini = to_configuration(net);
  int lifted = 0;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (net.node_class[i] == NodeClass::fixed_boundary) continue;
    const auto k = 3 * static_cast<Eigen::Index>(i);
    const double floor_z = ref_z_m(ref, X_ini[k], X_ini[k + 1]);
    if (floor_z - X_ini[k + 2] > cfg.constraint_tol) {
      X_ini[k + 2] = floor_z;
      ++lifted;
    }
  }
  if (lifted > 0) out.warnings.push_back("initial configuration penetrated the mold; lifted " + std::to_string(lifted) + " nodes");
  out.X_initial = X_ini;
  VectorXd gtmp;
  out.pi_initial = total_potential(model, X_ini, X_ini, gtmp);

  const DebulkProblem problem(model, ref, X_ini);
  const VectorXd y0 = VectorXd::Zero(problem.num_variables());
  const AugLagResult al = minimize_augmented_lagrangian(problem, y0, cfg, cfg.constraint_tol / problem.length_scale());

  out.X_final = problem.to_X(al.y);
  out.pi_final = total_potential(model, out.X_final, X_ini, gtmp);
  out.iterations = al.inner_iterations;
  out.outer_iterations = al.outer_iterations;
  out.function_evaluations = al.function_evaluations;
  out.stationarity = al.stationarity;
  // Keep the start when it is feasible and no worse.
  const Residuals res_ini = constraint_residuals(net, X_ini, ref);
  if (out.pi_final > out.pi_initial && res_ini.max_equality <= cfg.constraint_tol &&
      res_ini.max_penetration <= cfg.constraint_tol) {
    out.X_final = X_ini;
    out.pi_final = out.pi_initial;
  }
  const Residuals res = constraint_residuals(net, out.X_final, ref);
  out.max_equality_residual = res.max_equality;
  out.max_penetration = std::max(0.0, res.max_penetration);
  out.converged = al.converged && res.max_equality <= cfg.constraint_tol && res.max_penetration <= cfg.constraint_tol;
  if (!out.converged) out.warnings.push_back("solver did not converge within the iteration budget");
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace debulk
