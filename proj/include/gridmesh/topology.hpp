#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridmesh/casefile.hpp"
#include "gridmesh/network.hpp"

namespace gridmesh {

enum class Formulation { Feasibility, LeastSquares };

/// Selector matrix pairing every copy quantity (+1) with its owning core
/// quantity (-1); sum_i A_i chi_i = 0 enforces equality.
struct ConsensusBlock {
  int region = 1;  // 1-based
  Eigen::MatrixXd A;  // (4 n_conn) x n_state_i, entries in {-1, 0, +1}
};

struct MergeResult {
  CaseData merged;
  ConnectionSpec spec;
  std::vector<int> offsets;  // bus id offset per region (local id + offset = merged id)
  std::string sidecar_json() const;
};

/// Concatenates the regional cases into one case, appends the tie branches,
/// and applies the bus-type rules: the master keeps the global slack; a
/// to-endpoint loses its generation (slack endpoints also lose their
/// demand) and becomes PQ; a worker whose slack is not a to-endpoint gets
/// its slack converted to PV with set-points from its gen table.
MergeResult merge_cases(const std::vector<CaseData>& cases, const ConnectionSpec& spec);

/// Region models over core buses (all home buses, post-surgery specs) plus
/// one copy bus per incident tie (the neighbour's endpoint). Copy buses are
/// ordered by (owning region, merged bus id, connection index).
std::vector<RegionModel> split_cases(const std::vector<CaseData>& cases,
                                     const ConnectionSpec& spec);

std::vector<ConsensusBlock> build_consensus(const std::vector<RegionModel>& regions,
                                            const ConnectionSpec& spec);

struct DistProblem {
  Formulation formulation = Formulation::LeastSquares;
  std::vector<RegionModel> regions;
  std::vector<ConsensusBlock> consensus;
  MergeResult merged;

  int n_conn() const { return static_cast<int>(merged.spec.connections.size()); }
  int consensus_rows() const { return 4 * n_conn(); }
  std::vector<Eigen::VectorXd> initial_states() const;
  /// || sum_i A_i chi_i ||_inf building block.
  Eigen::VectorXd consensus_residual(const std::vector<Eigen::VectorXd>& states) const;
};

DistProblem build_problem(const std::vector<CaseData>& cases, const ConnectionSpec& spec,
                          Formulation formulation);

/// Fills region states (copies included) from per-merged-bus solution
/// vectors (vm in p.u., va in rad, p/q net injections in p.u.).
std::vector<Eigen::VectorXd> scatter_states(const DistProblem& problem,
                                            const Eigen::VectorXd& vm, const Eigen::VectorXd& va,
                                            const Eigen::VectorXd& p, const Eigen::VectorXd& q);

}  // namespace gridmesh
