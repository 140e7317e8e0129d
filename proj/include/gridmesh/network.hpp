#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridmesh/casefile.hpp"

namespace gridmesh {

/// Real and imaginary parts of the bus admittance matrix.
struct Admittance {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
  int n() const { return static_cast<int>(G.rows()); }
};

/// Builds Y over `buses` (in the given order) from `branches`; branch
/// from/to reference bus ids in `buses`. Standard branch model: series
/// admittance 1/(r+jx), half the charging susceptance per end, off-nominal
/// tap on the from side, phase shift in degrees.
Admittance build_admittance(double base_mva, const std::vector<BusRecord>& buses,
                            const std::vector<BranchRecord>& branches);
Admittance build_admittance(const CaseData& c);

/// The two scalars a bus specification pins down.
///   Slack: value_a = voltage magnitude, value_b = voltage angle (rad)
///   PQ:    value_a = net active power,  value_b = net reactive power (p.u.)
///   PV:    value_a = net active power,  value_b = voltage magnitude
struct SpecEntry {
  BusType type = BusType::PQ;
  double value_a = 0.0;
  double value_b = 0.0;
};

/// Where a copy bus comes from.
struct CopyBusRef {
  int owner_region = 0;  // 1-based
  int owner_bus = 0;     // bus id within the owning region's case
  int global_id = 0;     // id in the merged case
  int conn = 0;          // connection index this copy belongs to
};

/// Immutable description of one region: core buses carry full state
/// (theta, v, p, q), copy buses carry voltage state only. The stacked
/// state is chi = (theta_core | v_core | p_core | q_core | theta_copy | v_copy).
struct RegionModel {
  int index = 1;  // 1-based region index
  int n_core = 0;
  int n_copy = 0;
  std::vector<int> core_ids;         // home-case bus ids, case order
  std::vector<int> core_global_ids;  // ids in the merged case
  std::vector<CopyBusRef> copies;
  Admittance Y;  // over n_core + n_copy buses, core first
  std::vector<SpecEntry> specs;
  Eigen::VectorXd start;  // initial state from the case-file entries

  int n_state() const { return 4 * n_core + 2 * n_copy; }
  int n_residual() const { return 4 * n_core; }
  int th(int j) const { return j; }
  int vm(int j) const { return n_core + j; }
  int p(int j) const { return 2 * n_core + j; }
  int q(int j) const { return 3 * n_core + j; }
  int zth(int j) const { return 4 * n_core + j; }
  int zvm(int j) const { return 4 * n_core + n_copy + j; }
};

/// Active/reactive power mismatch at every core bus: computed injection
/// minus state injection. Layout: [dp_1..dp_n, dq_1..dq_n].
Eigen::VectorXd pf_residual(const RegionModel& m, const Eigen::VectorXd& chi);

/// Two entries per core bus, bus-major, per the bus specification.
Eigen::VectorXd bus_spec_residual(const RegionModel& m, const Eigen::VectorXd& chi);

/// Stacked [pf_residual; bus_spec_residual], length 4 n_core.
Eigen::VectorXd residual(const RegionModel& m, const Eigen::VectorXd& chi);

/// Analytic Jacobian of residual() with respect to chi.
Eigen::MatrixXd pf_jacobian(const RegionModel& m, const Eigen::VectorXd& chi);

/// sum_l mu[l] * Hessian of residual row l. Bus-spec rows are affine, so
/// only the trigonometric part of the power flow rows contributes.
Eigen::MatrixXd residual_hessian_contraction(const RegionModel& m, const Eigen::VectorXd& chi,
                                             const Eigen::VectorXd& mu);

}  // namespace gridmesh
