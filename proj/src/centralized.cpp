#include "gridmesh/centralized.hpp"

#include <cmath>
#include <vector>

#include "gridmesh/network.hpp"

namespace gridmesh {

PFSolution solve_newton_raphson(const CaseData& c, double tol, int max_iter) {
  c.validate();
  const int n = static_cast<int>(c.buses.size());
  const Admittance Y = build_admittance(c);
  const Eigen::MatrixXd& G = Y.G;
  const Eigen::MatrixXd& B = Y.B;

  Eigen::VectorXd theta(n), v(n), pspec(n), qspec(n);
  std::vector<int> pv, pq, nonslack;
  for (int k = 0; k < n; ++k) {
    const BusRecord& b = c.buses[k];
    theta[k] = b.va * M_PI / 180.0;
    v[k] = b.vm;
    if (b.type == BusType::PV || b.type == BusType::Slack) {
      for (const auto& g : c.gens)
        if (g.status && g.bus == b.id) {
          v[k] = g.vg;
          break;
        }
    }
    pspec[k] = c.net_p(b.id);
    qspec[k] = c.net_q(b.id);
    if (b.type == BusType::PV) pv.push_back(k);
    if (b.type == BusType::PQ) pq.push_back(k);
    if (b.type != BusType::Slack) nonslack.push_back(k);
  }
  const int nth = static_cast<int>(nonslack.size());
  const int nv = static_cast<int>(pq.size());

  Eigen::VectorXd p(n), q(n);
  auto calc = [&]() {
    for (int j = 0; j < n; ++j) {
      double pj = 0.0, qj = 0.0;
      for (int k = 0; k < n; ++k) {
        const double cth = std::cos(theta[j] - theta[k]);
        const double sth = std::sin(theta[j] - theta[k]);
        pj += v[k] * (G(j, k) * cth + B(j, k) * sth);
        qj += v[k] * (G(j, k) * sth - B(j, k) * cth);
      }
      p[j] = v[j] * pj;
      q[j] = v[j] * qj;
    }
  };

  auto mismatch = [&]() {
    Eigen::VectorXd mis(nth + nv);
    for (int a = 0; a < nth; ++a) mis[a] = p[nonslack[a]] - pspec[nonslack[a]];
    for (int a = 0; a < nv; ++a) mis[nth + a] = q[pq[a]] - qspec[pq[a]];
    return mis;
  };

  double mis_norm = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    calc();
    Eigen::VectorXd mis = mismatch();
    mis_norm = mis.size() ? mis.lpNorm<Eigen::Infinity>() : 0.0;
    if (mis_norm <= tol) {
      PFSolution sol{v, theta, p, q, it, mis_norm};
      return sol;
    }
    if (it == max_iter) break;

    Eigen::MatrixXd J(nth + nv, nth + nv);
    for (int a = 0; a < nth; ++a) {
      const int j = nonslack[a];
      for (int bcol = 0; bcol < nth; ++bcol) {
        const int k = nonslack[bcol];
        J(a, bcol) = (j == k) ? -q[j] - B(j, j) * v[j] * v[j]
                              : v[j] * v[k] * (G(j, k) * std::sin(theta[j] - theta[k]) -
                                               B(j, k) * std::cos(theta[j] - theta[k]));
      }
      for (int bcol = 0; bcol < nv; ++bcol) {
        const int k = pq[bcol];
        J(a, nth + bcol) = (j == k) ? p[j] / v[j] + G(j, j) * v[j]
                                    : v[j] * (G(j, k) * std::cos(theta[j] - theta[k]) +
                                              B(j, k) * std::sin(theta[j] - theta[k]));
      }
    }
    for (int a = 0; a < nv; ++a) {
      const int j = pq[a];
      for (int bcol = 0; bcol < nth; ++bcol) {
        const int k = nonslack[bcol];
        J(nth + a, bcol) = (j == k) ? p[j] - G(j, j) * v[j] * v[j]
                                    : -v[j] * v[k] * (G(j, k) * std::cos(theta[j] - theta[k]) +
                                                      B(j, k) * std::sin(theta[j] - theta[k]));
      }
      for (int bcol = 0; bcol < nv; ++bcol) {
        const int k = pq[bcol];
        J(nth + a, nth + bcol) = (j == k) ? q[j] / v[j] - B(j, j) * v[j]
                                          : v[j] * (G(j, k) * std::sin(theta[j] - theta[k]) -
                                                    B(j, k) * std::cos(theta[j] - theta[k]));
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd step = lu.solve(-mis);
    if (!step.allFinite())
      throw SolveError("singular Jacobian in Newton-Raphson at iteration " + std::to_string(it));
    for (int a = 0; a < nth; ++a) theta[nonslack[a]] += step[a];
    for (int a = 0; a < nv; ++a) v[pq[a]] += step[nth + a];
    if (v.minCoeff() <= 0.0)
      throw SolveError("Newton-Raphson produced a non-positive voltage magnitude");
  }
  throw SolveError("Newton-Raphson did not converge within " + std::to_string(max_iter) +
                   " iterations (mismatch " + std::to_string(mis_norm) + ")");
}

}  // namespace gridmesh
