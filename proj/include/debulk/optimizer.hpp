#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <string>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/scan_prep.hpp"

namespace debulk {

/// Smooth problem  min f(y)  s.t.  h(y) = 0,  c(y) <= 0, in the solver's scaled units.
class ConstrainedProblem {
 public:
  virtual ~ConstrainedProblem() = default;

  virtual Eigen::Index num_variables() const = 0;
  virtual Eigen::Index num_equalities() const = 0;
  virtual Eigen::Index num_inequalities() const = 0;

  /// f(y); writes grad f.
  virtual double objective(const Eigen::VectorXd& y, Eigen::VectorXd& grad) const = 0;
  virtual void constraints(const Eigen::VectorXd& y, Eigen::VectorXd& eq, Eigen::VectorXd& ineq) const = 0;
  /// grad += J_eq^T w_eq + J_ineq^T w_ineq
  virtual void add_jacobian_transpose(const Eigen::VectorXd& y, const Eigen::VectorXd& w_eq,
                                      const Eigen::VectorXd& w_ineq, Eigen::VectorXd& grad) const = 0;

  /// Optional sparse constraint Jacobians. Returning false disables preconditioning.
  virtual bool jacobian(const Eigen::VectorXd& /*y*/, Eigen::SparseMatrix<double>& /*J_eq*/,
                        Eigen::SparseMatrix<double>& /*J_ineq*/) const {
    return false;
  }
  /// Optional positive semidefinite approximation of sum_k w_eq[k] * Hess h_k, as triplets.
  virtual void add_curvature(const Eigen::VectorXd& /*y*/, const Eigen::VectorXd& /*w_eq*/,
                             std::vector<Eigen::Triplet<double>>& /*out*/) const {}
  /// Diagonal floor of the preconditioner, roughly the objective's own curvature.
  virtual double curvature_floor() const { return 1.0; }
};

struct SolverConfig {
  int max_iterations = 20000;        // inner L-BFGS iterations summed over outer loops
  int max_outer_iterations = 40;
  double constraint_tol = 1e-6;      // m, for both constraint families
  double stationarity_tol = 1e-5;    // scaled Lagrangian gradient, inf-norm
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e10;
  int lbfgs_memory = 12;
  int load_steps = 1;
  std::function<void(int outer, double objective, double eq_residual, double penetration,
                     double stationarity)> trace;

  void check() const;
};

/// Outcome of the augmented-Lagrangian minimization in the problem's own units.
struct AugLagResult {
  Eigen::VectorXd y;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  double objective = 0.0;
  double max_eq = 0.0;          // scaled
  double max_violation = 0.0;   // scaled
  double stationarity = 0.0;    // scaled
  int outer_iterations = 0;
  int inner_iterations = 0;
  int function_evaluations = 0;
  bool converged = false;
};

/// PHR augmented Lagrangian with an L-BFGS inner minimizer. `feasibility_tol` is in the
/// problem's scaled units.
AugLagResult minimize_augmented_lagrangian(const ConstrainedProblem& problem, const Eigen::VectorXd& y0,
                                           const SolverConfig& cfg, double feasibility_tol);

struct UnconstrainedResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

/// Initial inverse-Hessian model for L-BFGS, rebuilt every `refresh_every` iterations.
struct LbfgsPreconditioner {
  std::function<bool(const Eigen::VectorXd& x)> refresh;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& g)> apply;
  int refresh_every = 50;
};

/// L-BFGS with a strong-Wolfe line search.
UnconstrainedResult minimize_lbfgs(const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fun,
                                   const Eigen::VectorXd& x0, double grad_tol, int max_iterations,
                                   int memory = 12, const LbfgsPreconditioner* pre = nullptr);

struct SolveResult {
  Eigen::VectorXd X_final;     // m
  Eigen::VectorXd X_initial;   // m, after any lift onto the mold
  double pi_final = 0.0;       // J
  double pi_initial = 0.0;     // J
  int iterations = 0;
  int outer_iterations = 0;
  int function_evaluations = 0;
  double max_equality_residual = 0.0;  // m
  double max_penetration = 0.0;        // m
  double stationarity = 0.0;
  bool converged = false;
  double wall_time_s = 0.0;
  std::vector<std::string> warnings;
};

/// Constraint residuals of a configuration, recomputed from scratch.
struct Residuals {
  double max_equality = 0.0;   // m
  double max_penetration = 0.0;  // m
};
Residuals constraint_residuals(const PlyNet& net, const Eigen::VectorXd& X, const ReferenceSurface& ref);

/// Debulk solve: minimize Pi over non-fixed node coordinates subject to edge
/// inextensibility and mold non-penetration. `ref` is in mm.
SolveResult solve(const PlyNet& net, const MaterialParams& mat, const ReferenceSurface& ref,
                  const SolverConfig& cfg);

}  // namespace debulk
