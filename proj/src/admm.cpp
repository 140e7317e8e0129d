#include "gridmesh/admm.hpp"

#include <chrono>
#include <cmath>

#include "parallel.hpp"

namespace gridmesh {

std::vector<Eigen::VectorXd> admm_coordination(const std::vector<Eigen::VectorXd>& chi,
                                               const std::vector<Eigen::VectorXd>& lambda,
                                               double rho,
                                               const std::vector<ConsensusBlock>& blocks) {
  const int nreg = static_cast<int>(blocks.size());
  if (static_cast<int>(chi.size()) != nreg || static_cast<int>(lambda.size()) != nreg)
    throw SolveError("admm_coordination: shape mismatch");
  const int m = nreg ? static_cast<int>(blocks[0].A.rows()) : 0;

  // coordinates the consensus matrices actually touch, per region
  std::vector<std::vector<int>> cols(nreg);
  int total = 0;
  for (int i = 0; i < nreg; ++i) {
    const Eigen::MatrixXd& A = blocks[i].A;
    if (A.cols() != chi[i].size() || A.rows() != m)
      throw SolveError("admm_coordination: shape mismatch");
    for (int j = 0; j < A.cols(); ++j)
      if (A.col(j).cwiseAbs().maxCoeff() > 0.0) cols[i].push_back(j);
    total += static_cast<int>(cols[i].size());
  }

  std::vector<Eigen::VectorXd> zeta = chi;
  if (total == 0) return zeta;

  // stacked KKT over the touched coordinates:
  //   [rho blkdiag(At'At)   Us'] [u ]   [stack(At'(lambda + rho At chi))]
  //   [Us                    0 ] [mu] = [0]
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(total + m, total + m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(total + m);
  int off = 0;
  for (int i = 0; i < nreg; ++i) {
    const int k = static_cast<int>(cols[i].size());
    Eigen::MatrixXd At(m, k);
    Eigen::VectorXd xc(k);
    for (int j = 0; j < k; ++j) {
      At.col(j) = blocks[i].A.col(cols[i][j]);
      xc[j] = chi[i][cols[i][j]];
    }
    K.block(off, off, k, k) = rho * At.transpose() * At;
    K.block(total, off, m, k) = At;
    K.block(off, total, k, m) = At.transpose();
    rhs.segment(off, k) = At.transpose() * (lambda[i] + rho * (At * xc));
    off += k;
  }

  const Eigen::VectorXd sol = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(rhs);
  if (!sol.allFinite()) throw SolveError("singular coordination system in ADMM");
  off = 0;
  for (int i = 0; i < nreg; ++i) {
    for (int j = 0; j < static_cast<int>(cols[i].size()); ++j) zeta[i][cols[i][j]] = sol[off + j];
    off += static_cast<int>(cols[i].size());
  }
  return zeta;
}

AdmmResult admm_solve(const DistProblem& problem, const AdmmConfig& cfg) {
  if (cfg.rho <= 0.0) throw SolveError("ADMM needs rho > 0");
  const int nreg = static_cast<int>(problem.regions.size());
  const int m = problem.consensus_rows();

  AdmmResult res;
  res.zeta = cfg.zeta0.empty() ? problem.initial_states() : cfg.zeta0;
  if (static_cast<int>(res.zeta.size()) != nreg) throw SolveError("ADMM: bad initial states");
  res.lambda.assign(nreg, Eigen::VectorXd::Constant(m, cfg.lambda0));
  res.chi = res.zeta;
  res.trace.meta = {"method=admm",
                    "formulation=" + std::string(problem.formulation == Formulation::Feasibility
                                                     ? "feasibility"
                                                     : "least-squares"),
                    "rho=" + std::to_string(cfg.rho), "tol=" + std::to_string(cfg.tol),
                    "max_iter=" + std::to_string(cfg.max_iter)};

  std::vector<Eigen::VectorXd> prev_chi = res.chi;
  std::vector<double> times(nreg, 0.0);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    prev_chi = res.chi;
    try {
      detail::parallel_regions(nreg, cfg.threads, [&](int i) {
        LocalObjective obj;
        obj.model = &problem.regions[i];
        obj.formulation = problem.formulation;
        obj.lambda = res.lambda[i];
        obj.A = &problem.consensus[i].A;
        obj.rho = cfg.rho;
        obj.zeta = res.zeta[i];
        auto local = [&](const Eigen::VectorXd& start) {
          return (problem.formulation == Formulation::Feasibility)
                     ? solve_local_feasibility(obj, start, cfg.inner_tol)
                     : solve_local_least_squares(obj, start, cfg.inner_tol);
        };
        const auto t0 = std::chrono::steady_clock::now();
        LocalResult loc;
        try {
          loc = local(res.chi[i]);
        } catch (const SolveError&) {
          // warm start may be far off (perturbed or overshot); retry cold
          loc = local(problem.regions[i].start);
        }
        times[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.chi[i] = std::move(loc.chi);
      });
    } catch (const SolveError& e) {
      res.status = SolveStatus::Diverged;
      res.message = e.what();
      res.iterations = it - 1;
      return res;
    }

    res.zeta = admm_coordination(res.chi, res.lambda, cfg.rho, problem.consensus);

    double pf_max = 0.0, spec_max = 0.0, step_max = 0.0, dual_max = 0.0, time_sum = 0.0;
    for (int i = 0; i < nreg; ++i) {
      const Eigen::VectorXd dlam =
          cfg.rho * (problem.consensus[i].A * (res.chi[i] - res.zeta[i]));
      res.lambda[i] += dlam;

      TraceRow row;
      row.iter = it;
      row.region = problem.regions[i].index;
      row.pf_inf = pf_residual(problem.regions[i], res.chi[i]).lpNorm<Eigen::Infinity>();
      row.spec_inf = bus_spec_residual(problem.regions[i], res.chi[i]).lpNorm<Eigen::Infinity>();
      row.consensus_inf =
          (problem.consensus[i].A * (res.chi[i] - res.zeta[i])).lpNorm<Eigen::Infinity>();
      row.step_inf = (res.chi[i] - prev_chi[i]).lpNorm<Eigen::Infinity>();
      row.dual_inf = dlam.lpNorm<Eigen::Infinity>();
      row.local_time_s = times[i];
      res.trace.rows.push_back(row);

      pf_max = std::max(pf_max, row.pf_inf);
      spec_max = std::max(spec_max, row.spec_inf);
      step_max = std::max(step_max, row.step_inf);
      dual_max = std::max(dual_max, row.dual_inf);
      time_sum += times[i];
    }
    const double consensus = problem.consensus_residual(res.chi).lpNorm<Eigen::Infinity>();
    res.trace.rows.push_back(
        {it, -1, pf_max, spec_max, consensus, step_max, dual_max, time_sum});
    res.iterations = it;

    if (pf_max <= cfg.tol && spec_max <= cfg.tol && consensus <= cfg.tol) {
      res.status = SolveStatus::Converged;
      return res;
    }
    if (!std::isfinite(consensus) || consensus > cfg.divergence_limit) {
      res.status = SolveStatus::Diverged;
      res.message = "consensus violation exceeded the divergence limit";
      return res;
    }
  }
  res.status = SolveStatus::IterationLimit;
  res.message = "iteration budget exhausted";
  return res;
}

}  // namespace gridmesh
