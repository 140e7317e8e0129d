#include "gridmesh/aladin.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace gridmesh {

const char* hessian_method_name(HessianMethod m) {
  switch (m) {
    case HessianMethod::FiniteDiff: return "finite-diff";
    case HessianMethod::BFGS: return "bfgs";
    case HessianMethod::LBFGS: return "lbfgs";
    case HessianMethod::GaussNewton: return "gauss-newton";
  }
  return "?";
}

std::pair<std::vector<Eigen::VectorXd>, Eigen::VectorXd> aladin_coordination_qp(
    const SensitivityPack& s, const std::vector<Eigen::VectorXd>& chi,
    const Eigen::VectorXd& lambda, double rho, const Eigen::VectorXd& b,
    const std::vector<ConsensusBlock>& blocks) {
  const int nreg = static_cast<int>(blocks.size());
  if (static_cast<int>(chi.size()) != nreg || static_cast<int>(s.B.size()) != nreg ||
      static_cast<int>(s.grad_f.size()) != nreg)
    throw SolveError("coordination QP: shape mismatch");
  const int m = nreg ? static_cast<int>(blocks[0].A.rows()) : 0;
  const bool constrained = !s.grad_g.empty();

  Eigen::VectorXd rc = b.size() ? Eigen::VectorXd(-b) : Eigen::VectorXd::Zero(m);
  for (int i = 0; i < nreg; ++i) rc += blocks[i].A * chi[i];

  // Per-region KKT block K_i (B_i, bordered by grad_g_i when constrained);
  // the rho A'A coupling is rank 4 n_conn and handled by Woodbury:
  //   (K + rho U'U) z = r  with  U_i = [A_i 0].
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> factor(nreg);
  std::vector<Eigen::VectorXd> y0(nreg);
  std::vector<Eigen::MatrixXd> W(nreg);
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd Uy = Eigen::VectorXd::Zero(m);
  std::vector<int> nloc(nreg), ncon(nreg);
  for (int i = 0; i < nreg; ++i) {
    const int n = static_cast<int>(s.B[i].rows());
    const int c = constrained ? static_cast<int>(s.grad_g[i].rows()) : 0;
    nloc[i] = n;
    ncon[i] = c;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + c, n + c);
    K.topLeftCorner(n, n) = s.B[i];
    if (c) {
      K.topRightCorner(n, c) = s.grad_g[i].transpose();
      K.bottomLeftCorner(c, n) = s.grad_g[i];
    }
    factor[i].compute(K);

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + c);
    rhs.head(n) = -(s.grad_f[i] + blocks[i].A.transpose() * (lambda + rho * rc));
    y0[i] = factor[i].solve(rhs);

    Eigen::MatrixXd Ut = Eigen::MatrixXd::Zero(n + c, m);
    Ut.topRows(n) = blocks[i].A.transpose();
    W[i] = factor[i].solve(Ut);
    S += rho * blocks[i].A * W[i].topRows(n);
    Uy += blocks[i].A * y0[i].head(n);
    if (!y0[i].allFinite() || !W[i].allFinite())
      throw SolveError("singular KKT block in coordination QP");
  }

  const Eigen::VectorXd t = Eigen::PartialPivLU<Eigen::MatrixXd>(S).solve(rho * Uy);
  if (!t.allFinite()) throw SolveError("singular coupling system in coordination QP");

  std::vector<Eigen::VectorXd> dchi(nreg);
  int gtotal = 0;
  for (int i = 0; i < nreg; ++i) gtotal += ncon[i];
  Eigen::VectorXd duals(gtotal);
  int off = 0;
  for (int i = 0; i < nreg; ++i) {
    const Eigen::VectorXd z = y0[i] - W[i] * t;
    dchi[i] = z.head(nloc[i]);
    duals.segment(off, ncon[i]) = z.tail(ncon[i]);
    off += ncon[i];
  }
  return {std::move(dchi), std::move(duals)};
}

std::pair<std::vector<Eigen::VectorXd>, Eigen::VectorXd> aladin_update(
    const std::vector<Eigen::VectorXd>& chi, const std::vector<Eigen::VectorXd>& dchi,
    const Eigen::VectorXd& lambda, double rho, const std::vector<ConsensusBlock>& blocks,
    const Eigen::VectorXd& b) {
  const int nreg = static_cast<int>(blocks.size());
  const int m = nreg ? static_cast<int>(blocks[0].A.rows()) : 0;
  std::vector<Eigen::VectorXd> zeta(nreg);
  Eigen::VectorXd viol = b.size() ? Eigen::VectorXd(-b) : Eigen::VectorXd::Zero(m);
  for (int i = 0; i < nreg; ++i) {
    zeta[i] = chi[i] + dchi[i];
    viol += blocks[i].A * chi[i];
  }
  return {std::move(zeta), Eigen::VectorXd(lambda + rho * viol)};
}

AladinResult aladin_solve(const DistProblem& problem, const AladinConfig& cfg) {
  if (cfg.rho <= 0.0 || cfg.nu <= 0.0) throw SolveError("ALADIN needs rho, nu > 0");
  const int nreg = static_cast<int>(problem.regions.size());
  const int m = problem.consensus_rows();
  const bool feas = problem.formulation == Formulation::Feasibility;
  if (cfg.hessian == HessianMethod::GaussNewton && feas)
    throw SolveError("Gauss-Newton Hessian requires the least-squares formulation");

  AladinResult res;
  res.zeta = cfg.zeta0.empty() ? problem.initial_states() : cfg.zeta0;
  if (static_cast<int>(res.zeta.size()) != nreg) throw SolveError("ALADIN: bad initial states");
  res.lambda = Eigen::VectorXd::Constant(m, cfg.lambda0);
  res.chi = res.zeta;
  res.trace.meta = {"method=aladin",
                    "formulation=" + std::string(feas ? "feasibility" : "least-squares"),
                    "hessian=" + std::string(hessian_method_name(cfg.hessian)),
                    "rho=" + std::to_string(cfg.rho), "nu=" + std::to_string(cfg.nu),
                    "tol=" + std::to_string(cfg.tol), "max_iter=" + std::to_string(cfg.max_iter)};

  std::vector<HessianApprox> approx(nreg, HessianApprox(cfg.hessian));
  std::vector<Eigen::VectorXd> gamma(nreg);
  std::vector<double> times(nreg, 0.0);
  const Eigen::VectorXd b = cfg.b.size() ? cfg.b : Eigen::VectorXd::Zero(m);
  // Gauss-Newton steps are naturally well scaled (the gradient lives in the
  // range of the curvature); the other approximations need a leash
  const double limit =
      cfg.step_limit != 0.0
          ? cfg.step_limit
          : (cfg.hessian == HessianMethod::GaussNewton ? -1.0 : 0.5);
  double trust = limit > 0.0 ? limit : 0.0;
  double prev_score = std::numeric_limits<double>::infinity();

  // last QP step, kept unscaled: a rejected iteration reuses it with a
  // smaller trust radius instead of re-solving the QP
  std::vector<Eigen::VectorXd> chi_base, dchi_full;
  Eigen::VectorXd lambda_base;
  bool have_step = false;
  int rejects = 0;

  auto apply_step = [&]() {
    double longest = 0.0;
    for (const auto& d : dchi_full) longest = std::max(longest, d.lpNorm<Eigen::Infinity>());
    const double sc = (trust > 0.0 && longest > trust) ? trust / longest : 1.0;
    Eigen::VectorXd violn = -b;
    for (int i = 0; i < nreg; ++i) {
      res.zeta[i] = chi_base[i] + sc * dchi_full[i];
      violn += problem.consensus[i].A * res.zeta[i];
    }
    res.lambda = lambda_base + cfg.rho * violn;
    return sc * longest;
  };

  double applied_step = 0.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    auto run_locals = [&](bool warm) {
      detail::parallel_regions(nreg, cfg.threads, [&](int i) {
        LocalObjective obj;
        obj.model = &problem.regions[i];
        obj.formulation = problem.formulation;
        obj.lambda = res.lambda;
        obj.A = &problem.consensus[i].A;
        obj.nu = cfg.nu;
        obj.zeta = res.zeta[i];
        if (!cfg.sigma.empty()) obj.sigma = cfg.sigma[i];
        const Eigen::VectorXd& start = warm ? res.zeta[i] : problem.regions[i].start;
        const auto t0 = std::chrono::steady_clock::now();
        LocalResult loc = feas ? solve_local_feasibility(obj, start, cfg.inner_tol)
                               : solve_local_least_squares(obj, start, cfg.inner_tol);
        times[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.chi[i] = std::move(loc.chi);
        gamma[i] = std::move(loc.gamma);
      });
    };
    bool ok = true;
    std::string err;
    try {
      run_locals(true);
    } catch (const SolveError& e) {
      ok = false;
      err = e.what();
    }
    if (!ok && have_step && trust > 1e-3 && rejects < 60) {
      // the step overshot the locals' basin; retry it shorter
      ++rejects;
      trust = std::max(trust / 4.0, 1e-3);
      applied_step = apply_step();
      --it;
      continue;
    }
    if (!ok) {
      try {
        run_locals(false);  // last resort: case-file starting points
      } catch (const SolveError&) {
        res.status = SolveStatus::Diverged;
        res.message = err;
        res.iterations = it - 1;
        return res;
      }
    }

    double pf_max = 0.0, spec_max = 0.0, time_sum = 0.0;
    std::vector<double> pf(nreg), sp(nreg);
    for (int i = 0; i < nreg; ++i) {
      pf[i] = pf_residual(problem.regions[i], res.chi[i]).lpNorm<Eigen::Infinity>();
      sp[i] = bus_spec_residual(problem.regions[i], res.chi[i]).lpNorm<Eigen::Infinity>();
      pf_max = std::max(pf_max, pf[i]);
      spec_max = std::max(spec_max, sp[i]);
      time_sum += times[i];
    }
    Eigen::VectorXd viol = -b;
    for (int i = 0; i < nreg; ++i) viol += problem.consensus[i].A * res.chi[i];
    const double consensus = viol.lpNorm<Eigen::Infinity>();
    const double score = pf_max + spec_max + consensus;

    if (trust > 0.0 && have_step && score > 2.0 * prev_score && trust > 1e-3 && rejects < 60) {
      // clearly worse than the last accepted iterate: roll the step back
      // and retry it shorter
      ++rejects;
      trust = std::max(trust / 4.0, 1e-3);
      applied_step = apply_step();
      --it;
      continue;
    }
    res.iterations = it;
    if (trust > 0.0) {
      if (score < prev_score) trust = std::min(trust * 2.0, limit);
      prev_score = score;
    }

    if (pf_max <= cfg.tol && spec_max <= cfg.tol && consensus <= cfg.tol) {
      for (int i = 0; i < nreg; ++i)
        res.trace.rows.push_back({it, problem.regions[i].index, pf[i], sp[i], 0.0, 0.0, 0.0,
                                  times[i]});
      res.trace.rows.push_back({it, -1, pf_max, spec_max, consensus, 0.0, 0.0, time_sum});
      res.status = SolveStatus::Converged;
      return res;
    }
    if (!std::isfinite(consensus) || consensus > cfg.divergence_limit) {
      res.trace.rows.push_back({it, -1, pf_max, spec_max, consensus, 0.0, 0.0, time_sum});
      res.status = SolveStatus::Diverged;
      res.message = "consensus violation exceeded the divergence limit";
      return res;
    }

    SensitivityPack pack;
    pack.grad_f.resize(nreg);
    pack.B.resize(nreg);
    if (feas) pack.grad_g.resize(nreg);
    try {
      detail::parallel_regions(nreg, cfg.threads, [&](int i) {
        const RegionModel& mdl = problem.regions[i];
        pack.grad_f[i] =
            feas ? Eigen::VectorXd::Zero(mdl.n_state()).eval()
                 : Eigen::VectorXd(2.0 * pf_jacobian(mdl, res.chi[i]).transpose() *
                                   residual(mdl, res.chi[i]));
        pack.B[i] = hessian_approx(approx[i], mdl, problem.formulation, res.chi[i], gamma[i]);
        if (feas) pack.grad_g[i] = pf_jacobian(mdl, res.chi[i]);
      });

      auto [dchi, duals] = aladin_coordination_qp(pack, res.chi, res.lambda, cfg.rho, b,
                                                  problem.consensus);
      // The dual step uses the violation at the QP-updated point chi + dchi,
      // which makes lambda the multiplier of the coordination QP itself
      // (evaluated at chi the update oscillates instead of contracting).
      chi_base = res.chi;
      dchi_full = std::move(dchi);
      lambda_base = res.lambda;
      have_step = true;
      applied_step = apply_step();

      const double dual_step = (res.lambda - lambda_base).lpNorm<Eigen::Infinity>();
      for (int i = 0; i < nreg; ++i) {
        const double st = (res.zeta[i] - chi_base[i]).lpNorm<Eigen::Infinity>();
        res.trace.rows.push_back({it, problem.regions[i].index, pf[i], sp[i], 0.0, st, 0.0,
                                  times[i]});
      }
      res.trace.rows.push_back(
          {it, -1, pf_max, spec_max, consensus, applied_step, dual_step, time_sum});
    } catch (const SolveError& e) {
      res.status = SolveStatus::Diverged;
      res.message = e.what();
      return res;
    }
  }
  res.status = SolveStatus::IterationLimit;
  res.message = "iteration budget exhausted";
  return res;
}

}  // namespace gridmesh
