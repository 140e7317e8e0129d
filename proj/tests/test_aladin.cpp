#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gridmesh/aladin.hpp"
#include "gridmesh/casefile.hpp"
#include "gridmesh/centralized.hpp"
#include "gridmesh/topology.hpp"
#include "test_util.hpp"

using namespace gridmesh;

namespace {

DistProblem problem53(Formulation f) {
  return build_problem({parse_matpower_case(read_fixture("case9.m")),
                        parse_matpower_case(read_fixture("case14.m")),
                        parse_matpower_case(read_fixture("case30.m"))},
                       load_connection_spec(fixture_path("conn53.json")), f);
}

std::vector<Eigen::VectorXd> central_states(const DistProblem& prob) {
  const PFSolution sol = solve_newton_raphson(prob.merged.merged);
  return scatter_states(prob, sol.vm, sol.va, sol.p, sol.q);
}

// perturbed states plus Gauss-Newton sensitivities around them
struct QpSetup {
  std::vector<Eigen::VectorXd> chi;
  Eigen::VectorXd lambda;
  Eigen::VectorXd b;
  SensitivityPack s;
};

QpSetup make_setup(const DistProblem& prob, bool with_constraints, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-0.05, 0.05);
  QpSetup q;
  q.b = Eigen::VectorXd::Zero(prob.consensus_rows());
  q.lambda = Eigen::VectorXd(prob.consensus_rows());
  for (int j = 0; j < q.lambda.size(); ++j) q.lambda[j] = U(rng);
  for (const RegionModel& m : prob.regions) {
    Eigen::VectorXd chi = m.start;
    for (int j = 0; j < chi.size(); ++j) chi[j] += U(rng);
    if (with_constraints) {
      // well-conditioned synthetic blocks: this exercises the QP algebra
      // without the ~1e11 condition number of the tie-line Gauss-Newton
      // blocks swamping the comparison
      const int n = static_cast<int>(chi.size());
      Eigen::MatrixXd R(n, n);
      for (int a = 0; a < n; ++a)
        for (int bcol = 0; bcol < n; ++bcol) R(a, bcol) = U(rng);
      q.s.B.push_back(Eigen::MatrixXd::Identity(n, n) + R * R.transpose());
      Eigen::MatrixXd Jc(m.n_residual(), n);
      for (int a = 0; a < Jc.rows(); ++a)
        for (int bcol = 0; bcol < n; ++bcol) Jc(a, bcol) = U(rng);
      q.s.grad_g.push_back(Jc);
      Eigen::VectorXd g(n);
      for (int j = 0; j < g.size(); ++j) g[j] = U(rng);
      q.s.grad_f.push_back(g);
    } else {
      const Eigen::VectorXd r = residual(m, chi);
      const Eigen::MatrixXd J = pf_jacobian(m, chi);
      q.s.B.push_back(regularize_pd(2.0 * J.transpose() * J));
      q.s.grad_f.push_back(2.0 * J.transpose() * r);
    }
    q.chi.push_back(chi);
  }
  return q;
}

}  // namespace

TEST_CASE("coordination QP matches a dense solve (least squares)") {
  const DistProblem prob = problem53(Formulation::LeastSquares);
  const QpSetup q = make_setup(prob, false, 11);
  const auto [dchi, mult] = aladin_coordination_qp(q.s, q.chi, q.lambda, 1e2, q.b, prob.consensus);
  CHECK(mult.size() == 0);

  // dense reference: (blkdiag B + rho Abar' Abar) d = -(g + Abar' lam + rho Abar' (Abar chi - b))
  int ntot = 0;
  for (const auto& c : q.chi) ntot += static_cast<int>(c.size());
  const int m = prob.consensus_rows();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ntot, ntot);
  Eigen::MatrixXd Abar(m, ntot);
  Eigen::VectorXd g(ntot), d_qp(ntot);
  Eigen::VectorXd viol = -q.b;
  int off = 0;
  for (size_t i = 0; i < q.chi.size(); ++i) {
    const int n = static_cast<int>(q.chi[i].size());
    H.block(off, off, n, n) = q.s.B[i];
    Abar.middleCols(off, n) = prob.consensus[i].A;
    g.segment(off, n) = q.s.grad_f[i];
    d_qp.segment(off, n) = dchi[i];
    viol += prob.consensus[i].A * q.chi[i];
    off += n;
  }
  H += 1e2 * Abar.transpose() * Abar;
  const Eigen::VectorXd rhs = -(g + Abar.transpose() * q.lambda + 1e2 * Abar.transpose() * viol);
  const Eigen::VectorXd d_ref = H.ldlt().solve(rhs);
  const double scale = std::max(1.0, d_ref.lpNorm<Eigen::Infinity>());
  CHECK((d_qp - d_ref).lpNorm<Eigen::Infinity>() <= 1e-6 * scale);
  // the returned step solves the normal equations to working precision
  CHECK((H * d_qp - rhs).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("coordination QP satisfies the feasibility-mode KKT system") {
  const DistProblem prob = problem53(Formulation::Feasibility);
  const QpSetup q = make_setup(prob, true, 13);
  const double rho = 1e2;
  const auto [dchi, mult] = aladin_coordination_qp(q.s, q.chi, q.lambda, rho, q.b, prob.consensus);

  Eigen::VectorXd viol = -q.b;
  for (size_t i = 0; i < q.chi.size(); ++i)
    viol += prob.consensus[i].A * (q.chi[i] + dchi[i]);

  int moff = 0;
  for (size_t i = 0; i < q.chi.size(); ++i) {
    const Eigen::MatrixXd& A = prob.consensus[i].A;
    const Eigen::MatrixXd& J = q.s.grad_g[i];
    const Eigen::VectorXd mu = mult.segment(moff, J.rows());
    moff += static_cast<int>(J.rows());
    CHECK((J * dchi[i]).lpNorm<Eigen::Infinity>() <= 1e-10);
    // stationarity of the coupled Lagrangian
    const Eigen::VectorXd st = q.s.B[i] * dchi[i] + q.s.grad_f[i] +
                               A.transpose() * (q.lambda + rho * viol) + J.transpose() * mu;
    CHECK(st.lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + mu.lpNorm<Eigen::Infinity>()));
  }
  CHECK(moff == mult.size());
}

TEST_CASE("the QP proposes a zero step at the scattered solution") {
  const DistProblem prob = problem53(Formulation::LeastSquares);
  const std::vector<Eigen::VectorXd> chi = central_states(prob);
  SensitivityPack s;
  for (size_t i = 0; i < chi.size(); ++i) {
    const Eigen::MatrixXd J = pf_jacobian(prob.regions[i], chi[i]);
    s.B.push_back(regularize_pd(2.0 * J.transpose() * J));
    s.grad_f.push_back(2.0 * J.transpose() * residual(prob.regions[i], chi[i]));
  }
  const Eigen::VectorXd lam = Eigen::VectorXd::Zero(prob.consensus_rows());
  const Eigen::VectorXd b = Eigen::VectorXd::Zero(prob.consensus_rows());
  const auto [dchi, mult] = aladin_coordination_qp(s, chi, lam, 1e2, b, prob.consensus);
  for (const Eigen::VectorXd& d : dchi) CHECK(d.lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("aladin_update applies the textbook formulas") {
  const DistProblem prob = problem53(Formulation::LeastSquares);
  const QpSetup q = make_setup(prob, false, 17);
  std::vector<Eigen::VectorXd> dchi;
  for (const Eigen::VectorXd& c : q.chi) dchi.push_back(0.01 * c);
  const double rho = 42.0;
  const auto [zeta, lam] = aladin_update(q.chi, dchi, q.lambda, rho, prob.consensus, q.b);

  Eigen::VectorXd viol = -q.b;
  for (size_t i = 0; i < q.chi.size(); ++i) {
    CHECK(zeta[i] == q.chi[i] + dchi[i]);
    viol += prob.consensus[i].A * q.chi[i];
  }
  CHECK((lam - (q.lambda + rho * viol)).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("finite differences and Gauss-Newton agree on the solution") {
  const DistProblem prob = problem53(Formulation::LeastSquares);
  AladinConfig cfg;
  cfg.rho = 1e3;
  cfg.tol = 1e-8;
  cfg.max_iter = 100;
  cfg.hessian = HessianMethod::GaussNewton;
  const AladinResult gn = aladin_solve(prob, cfg);
  REQUIRE(gn.status == SolveStatus::Converged);
  cfg.hessian = HessianMethod::FiniteDiff;
  const AladinResult fd = aladin_solve(prob, cfg);
  REQUIRE(fd.status == SolveStatus::Converged);
  for (size_t i = 0; i < gn.chi.size(); ++i)
    CHECK((gn.chi[i] - fd.chi[i]).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("the iteration budget is honoured") {
  const DistProblem prob = problem53(Formulation::LeastSquares);
  AladinConfig cfg;
  cfg.rho = 1e3;
  cfg.max_iter = 2;
  const AladinResult res = aladin_solve(prob, cfg);
  CHECK(res.status == SolveStatus::IterationLimit);
  CHECK(res.iterations == 2);
  CHECK(res.trace.iterations() == 2);
}
