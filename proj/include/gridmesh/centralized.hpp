#pragma once

#include <Eigen/Dense>

#include "gridmesh/casefile.hpp"

namespace gridmesh {

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-bus solution in case bus order: vm p.u., va rad, net p/q in p.u.
struct PFSolution {
  Eigen::VectorXd vm;
  Eigen::VectorXd va;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  int iterations = 0;
  double mismatch = 0.0;
};

/// Full Newton-Raphson on the polar mismatch equations, starting from the
/// case-file voltages (gen set-points at generation buses). Slack p,q and
/// PV q are recovered from the converged voltages. PV buses hold their
/// magnitude unconditionally; reactive-limit switching is not modelled.
PFSolution solve_newton_raphson(const CaseData& c, double tol = 1e-10, int max_iter = 30);

}  // namespace gridmesh
