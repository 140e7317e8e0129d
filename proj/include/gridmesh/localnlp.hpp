#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>

#include "gridmesh/centralized.hpp"  // SolveError
#include "gridmesh/topology.hpp"

namespace gridmesh {

/// One region's step-1 subproblem. The augmentation is
///   lambda' A chi + (rho/2) ||A (chi - zeta)||^2 + (nu/2) ||chi - zeta||^2_Sigma
/// on top of f(chi) = ||residual(chi)||^2 (least squares) or f = 0 with
/// residual(chi) = 0 as a hard constraint (feasibility). Empty lambda/zeta
/// and zero rho/nu switch the corresponding terms off; empty sigma means
/// the identity scaling.
struct LocalObjective {
  const RegionModel* model = nullptr;
  Formulation formulation = Formulation::LeastSquares;
  Eigen::VectorXd lambda;              // consensus-space multiplier
  const Eigen::MatrixXd* A = nullptr;  // consensus block of this region
  double rho = 0.0;
  double nu = 0.0;
  Eigen::VectorXd zeta;
  Eigen::VectorXd sigma;  // diagonal of Sigma
};

struct LocalResult {
  Eigen::VectorXd chi;
  Eigen::VectorXd gamma;  // constraint multipliers; empty in least-squares mode
  int iterations = 0;
};

/// Augmentation + cost terms, for checks and for the solvers themselves.
double augmented_value(const LocalObjective& obj, const Eigen::VectorXd& chi);
Eigen::VectorXd augmented_gradient(const LocalObjective& obj, const Eigen::VectorXd& chi);

/// Damped Gauss-Newton (Levenberg) on the residual with the quadratic
/// augmentation handled exactly. Stops when the total gradient drops
/// below tol in the max norm.
LocalResult solve_local_least_squares(const LocalObjective& obj, const Eigen::VectorXd& chi_start,
                                      double tol = 1e-12, int max_iter = 200);

/// Newton iterations on the KKT system of
///   min  lambda' A chi + quadratic augmentation   s.t.  residual(chi) = 0
/// with a backtracking line search on the squared KKT residual.
LocalResult solve_local_feasibility(const LocalObjective& obj, const Eigen::VectorXd& chi_start,
                                    double tol = 1e-12, int max_iter = 300);

enum class HessianMethod { FiniteDiff, BFGS, LBFGS, GaussNewton };

/// Symmetrizes B and clamps its spectrum to [delta_min, inf) by flipping
/// negative eigenvalues (|lambda|, floored at delta_min).
Eigen::MatrixXd regularize_pd(Eigen::MatrixXd B, double delta_min = 1e-6);

/// Gradient of f + gamma' g at chi: 2 J' r in least-squares mode (gamma
/// ignored), J' gamma in feasibility mode.
Eigen::VectorXd lagrangian_gradient(const RegionModel& m, Formulation f, const Eigen::VectorXd& chi,
                                    const Eigen::VectorXd& gamma);

/// Stateful Hessian approximation of the local Lagrangian. BFGS/L-BFGS keep
/// curvature pairs across calls; one instance per region.
class HessianApprox {
 public:
  explicit HessianApprox(HessianMethod method, double delta_min = 1e-6, int memory = 10);

  HessianMethod method() const { return method_; }

  /// grad is the Lagrangian gradient at x (feeds the quasi-Newton pairs),
  /// grad_fn re-evaluates it elsewhere (finite differences), jacobian is
  /// the residual Jacobian at x (Gauss-Newton). Unused inputs may be
  /// empty/null. The result is symmetric with lambda_min >= delta_min.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn,
                           const Eigen::MatrixXd* jacobian);

  void reset();

 private:
  HessianMethod method_;
  double delta_min_;
  int memory_;
  Eigen::MatrixXd bfgs_;  // running BFGS estimate
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs_;  // (s, y) for L-BFGS
  bool has_prev_ = false;
  Eigen::VectorXd prev_x_, prev_grad_;
};

/// Convenience wrapper evaluating the approximation for a region model.
Eigen::MatrixXd hessian_approx(HessianApprox& h, const RegionModel& m, Formulation f,
                               const Eigen::VectorXd& chi, const Eigen::VectorXd& gamma);

}  // namespace gridmesh
