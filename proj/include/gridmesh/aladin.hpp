#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridmesh/localnlp.hpp"
#include "gridmesh/trace.hpp"

namespace gridmesh {

struct AladinConfig {
  double rho = 1e2;
  double nu = 1e4;
  HessianMethod hessian = HessianMethod::GaussNewton;
  int max_iter = 50;
  double tol = 1e-10;
  double inner_tol = 1e-12;
  double lambda0 = 0.01;               // initial value of every dual component
  Eigen::VectorXd b;                   // affine consensus offset; empty: zero
  std::vector<Eigen::VectorXd> sigma;  // diag of Sigma_i; empty: identity
  std::vector<Eigen::VectorXd> zeta0;  // empty: case-file starting states
  int threads = 1;
  double divergence_limit = 1e6;
  // trust radius for the QP step (max norm); steps are scaled back to the
  // radius, which shrinks after clearly worsening iterations and recovers
  // after improving ones. Keeps rough Hessian approximations from
  // overshooting. 0 picks a per-method default (off for Gauss-Newton, 0.5
  // otherwise); negative disables the safeguard.
  double step_limit = 0.0;
};

/// Per-region sensitivities handed to the coordination QP.
struct SensitivityPack {
  std::vector<Eigen::VectorXd> grad_f;
  std::vector<Eigen::MatrixXd> B;       // symmetric positive definite
  std::vector<Eigen::MatrixXd> grad_g;  // residual Jacobians; empty in least-squares mode
};

struct AladinResult {
  std::vector<Eigen::VectorXd> chi;
  std::vector<Eigen::VectorXd> zeta;
  Eigen::VectorXd lambda;
  IterationTrace trace;
  SolveStatus status = SolveStatus::IterationLimit;
  int iterations = 0;
  std::string message;
};

/// Exact solution of the coordination QP
///   min  sum_i 1/2 d_i' B_i d_i + grad_f_i' d_i
///        + lambda' (sum_i A_i (chi_i + d_i) - b)
///        + rho/2 ||sum_i A_i (chi_i + d_i) - b||^2
///   s.t. grad_g_i d_i = 0 for every region with constraints.
/// Returns the steps and the stacked constraint multipliers (empty in
/// least-squares mode). The consensus coupling is folded in by a Woodbury
/// solve around the block-diagonal KKT factors.
std::pair<std::vector<Eigen::VectorXd>, Eigen::VectorXd> aladin_coordination_qp(
    const SensitivityPack& s, const std::vector<Eigen::VectorXd>& chi,
    const Eigen::VectorXd& lambda, double rho, const Eigen::VectorXd& b,
    const std::vector<ConsensusBlock>& blocks);

/// Step-4 formulas: zeta_i = chi_i + dchi_i, lambda += rho (sum A_i chi_i - b).
std::pair<std::vector<Eigen::VectorXd>, Eigen::VectorXd> aladin_update(
    const std::vector<Eigen::VectorXd>& chi, const std::vector<Eigen::VectorXd>& dchi,
    const Eigen::VectorXd& lambda, double rho, const std::vector<ConsensusBlock>& blocks,
    const Eigen::VectorXd& b);

AladinResult aladin_solve(const DistProblem& problem, const AladinConfig& cfg);

const char* hessian_method_name(HessianMethod m);

}  // namespace gridmesh
