#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridmesh/localnlp.hpp"
#include "gridmesh/trace.hpp"

namespace gridmesh {

struct AdmmConfig {
  double rho = 1e3;
  int max_iter = 200;
  double tol = 1e-10;        // on pf/spec/consensus max norms
  double inner_tol = 1e-12;  // local solver stationarity
  double lambda0 = 0.01;     // initial value of every dual component
  std::vector<Eigen::VectorXd> zeta0;  // empty: case-file starting states
  int threads = 1;
  bool record_timing = false;
  double divergence_limit = 1e6;  // on the consensus norm
};

struct AdmmResult {
  std::vector<Eigen::VectorXd> chi;
  std::vector<Eigen::VectorXd> zeta;
  std::vector<Eigen::VectorXd> lambda;
  IterationTrace trace;
  SolveStatus status = SolveStatus::IterationLimit;
  int iterations = 0;
  std::string message;  // diagnostic when status != Converged
};

/// Exact minimizer of the coordination step
///   min_zeta  sum_i -lambda_i' A_i zeta_i + (rho/2) ||A_i (chi_i - zeta_i)||^2
///   s.t.      sum_i A_i zeta_i = 0
/// solved as a small KKT system over the coordinates the A_i touch;
/// untouched coordinates are passed through from chi.
std::vector<Eigen::VectorXd> admm_coordination(const std::vector<Eigen::VectorXd>& chi,
                                               const std::vector<Eigen::VectorXd>& lambda,
                                               double rho,
                                               const std::vector<ConsensusBlock>& blocks);

AdmmResult admm_solve(const DistProblem& problem, const AdmmConfig& cfg);

}  // namespace gridmesh
