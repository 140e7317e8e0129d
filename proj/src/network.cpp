#include "gridmesh/network.hpp"

#include <cmath>
#include <map>

namespace gridmesh {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

Admittance build_admittance(double base_mva, const std::vector<BusRecord>& buses,
                            const std::vector<BranchRecord>& branches) {
  const int n = static_cast<int>(buses.size());
  std::map<int, int> idx;
  for (int k = 0; k < n; ++k) idx[buses[k].id] = k;

  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& br : branches) {
    if (!br.status) continue;
    if (br.r == 0.0 && br.x == 0.0)
      throw CaseError("singular branch " + std::to_string(br.from) + "-" +
                      std::to_string(br.to) + " (r = x = 0)");
    const int f = idx.at(br.from);
    const int t = idx.at(br.to);
    const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> bc(0.0, br.b / 2.0);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    const std::complex<double> T = std::polar(tap, br.shift * kDegToRad);
    Y(f, f) += (ys + bc) / (tap * tap);
    Y(f, t) += -ys / std::conj(T);
    Y(t, f) += -ys / T;
    Y(t, t) += ys + bc;
  }
  for (const auto& b : buses)
    Y(idx.at(b.id), idx.at(b.id)) += std::complex<double>(b.gs, b.bs) / base_mva;

  return Admittance{Y.real(), Y.imag()};
}

Admittance build_admittance(const CaseData& c) {
  return build_admittance(c.base_mva, c.buses, c.branches);
}

namespace {

// theta/v over all region buses (core first, then copies), state columns
// resolved through the model's layout.
struct Unpacked {
  Eigen::VectorXd theta;
  Eigen::VectorXd v;
};

Unpacked unpack(const RegionModel& m, const Eigen::VectorXd& chi) {
  const int n = m.n_core + m.n_copy;
  Unpacked u{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int j = 0; j < m.n_core; ++j) {
    u.theta[j] = chi[m.th(j)];
    u.v[j] = chi[m.vm(j)];
  }
  for (int j = 0; j < m.n_copy; ++j) {
    u.theta[m.n_core + j] = chi[m.zth(j)];
    u.v[m.n_core + j] = chi[m.zvm(j)];
  }
  return u;
}

int col_th(const RegionModel& m, int t) { return t < m.n_core ? m.th(t) : m.zth(t - m.n_core); }
int col_vm(const RegionModel& m, int t) { return t < m.n_core ? m.vm(t) : m.zvm(t - m.n_core); }

void check_dims(const RegionModel& m, const Eigen::VectorXd& chi) {
  if (chi.size() != m.n_state())
    throw std::invalid_argument("state length " + std::to_string(chi.size()) +
                                " does not match region dimension " +
                                std::to_string(m.n_state()));
}

}  // namespace

Eigen::VectorXd pf_residual(const RegionModel& m, const Eigen::VectorXd& chi) {
  check_dims(m, chi);
  const auto [theta, v] = unpack(m, chi);
  const int n = m.n_core + m.n_copy;
  Eigen::VectorXd res(2 * m.n_core);
  for (int j = 0; j < m.n_core; ++j) {
    double pj = 0.0, qj = 0.0;
    for (int k = 0; k < n; ++k) {
      const double c = std::cos(theta[j] - theta[k]);
      const double s = std::sin(theta[j] - theta[k]);
      pj += v[k] * (m.Y.G(j, k) * c + m.Y.B(j, k) * s);
      qj += v[k] * (m.Y.G(j, k) * s - m.Y.B(j, k) * c);
    }
    res[j] = v[j] * pj - chi[m.p(j)];
    res[m.n_core + j] = v[j] * qj - chi[m.q(j)];
  }
  return res;
}

Eigen::VectorXd bus_spec_residual(const RegionModel& m, const Eigen::VectorXd& chi) {
  check_dims(m, chi);
  Eigen::VectorXd res(2 * m.n_core);
  for (int j = 0; j < m.n_core; ++j) {
    const SpecEntry& sp = m.specs[j];
    switch (sp.type) {
      case BusType::Slack:
        res[2 * j] = chi[m.vm(j)] - sp.value_a;
        res[2 * j + 1] = chi[m.th(j)] - sp.value_b;
        break;
      case BusType::PQ:
        res[2 * j] = chi[m.p(j)] - sp.value_a;
        res[2 * j + 1] = chi[m.q(j)] - sp.value_b;
        break;
      case BusType::PV:
        res[2 * j] = chi[m.p(j)] - sp.value_a;
        res[2 * j + 1] = chi[m.vm(j)] - sp.value_b;
        break;
    }
  }
  return res;
}

Eigen::VectorXd residual(const RegionModel& m, const Eigen::VectorXd& chi) {
  Eigen::VectorXd out(m.n_residual());
  out.head(2 * m.n_core) = pf_residual(m, chi);
  out.tail(2 * m.n_core) = bus_spec_residual(m, chi);
  return out;
}

Eigen::MatrixXd pf_jacobian(const RegionModel& m, const Eigen::VectorXd& chi) {
  check_dims(m, chi);
  const auto [theta, v] = unpack(m, chi);
  const int n = m.n_core + m.n_copy;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m.n_residual(), m.n_state());

  for (int j = 0; j < m.n_core; ++j) {
    const int rp = j;
    const int rq = m.n_core + j;
    double sum_e = 0.0, sum_f = 0.0;          // sums of v_k e_jk / v_k f_jk over all k
    double dp_dthj = 0.0, dq_dthj = 0.0;      // off-diagonal accumulation
    for (int k = 0; k < n; ++k) {
      const double c = std::cos(theta[j] - theta[k]);
      const double s = std::sin(theta[j] - theta[k]);
      const double e = m.Y.G(j, k) * c + m.Y.B(j, k) * s;
      const double f = m.Y.G(j, k) * s - m.Y.B(j, k) * c;
      sum_e += v[k] * e;
      sum_f += v[k] * f;
      if (k == j) continue;
      dp_dthj += v[j] * v[k] * (-f);
      dq_dthj += v[j] * v[k] * e;
      J(rp, col_th(m, k)) = v[j] * v[k] * f;
      J(rq, col_th(m, k)) = -v[j] * v[k] * e;
      J(rp, col_vm(m, k)) = v[j] * e;
      J(rq, col_vm(m, k)) = v[j] * f;
    }
    J(rp, col_th(m, j)) = dp_dthj;
    J(rq, col_th(m, j)) = dq_dthj;
    J(rp, col_vm(m, j)) = sum_e + v[j] * m.Y.G(j, j);
    J(rq, col_vm(m, j)) = sum_f - v[j] * m.Y.B(j, j);
    J(rp, m.p(j)) = -1.0;
    J(rq, m.q(j)) = -1.0;
  }

  for (int j = 0; j < m.n_core; ++j) {
    const int r0 = 2 * m.n_core + 2 * j;
    switch (m.specs[j].type) {
      case BusType::Slack:
        J(r0, m.vm(j)) = 1.0;
        J(r0 + 1, m.th(j)) = 1.0;
        break;
      case BusType::PQ:
        J(r0, m.p(j)) = 1.0;
        J(r0 + 1, m.q(j)) = 1.0;
        break;
      case BusType::PV:
        J(r0, m.p(j)) = 1.0;
        J(r0 + 1, m.vm(j)) = 1.0;
        break;
    }
  }
  return J;
}

Eigen::MatrixXd residual_hessian_contraction(const RegionModel& m, const Eigen::VectorXd& chi,
                                             const Eigen::VectorXd& mu) {
  check_dims(m, chi);
  if (mu.size() != m.n_residual())
    throw std::invalid_argument("multiplier length does not match residual count");
  const auto [theta, v] = unpack(m, chi);
  const int n = m.n_core + m.n_copy;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m.n_state(), m.n_state());

  auto add = [&H](int a, int b, double val) {
    H(a, b) += val;
    if (a != b) H(b, a) += val;
  };

  for (int j = 0; j < m.n_core; ++j) {
    const double mp = mu[j];
    const double mq = mu[m.n_core + j];
    if (mp == 0.0 && mq == 0.0) continue;
    const int tj = col_th(m, j);
    const int vj = col_vm(m, j);
    add(vj, vj, mp * 2.0 * m.Y.G(j, j) - mq * 2.0 * m.Y.B(j, j));
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      const double c = std::cos(theta[j] - theta[k]);
      const double s = std::sin(theta[j] - theta[k]);
      const double e = m.Y.G(j, k) * c + m.Y.B(j, k) * s;
      const double f = m.Y.G(j, k) * s - m.Y.B(j, k) * c;
      const int tk = col_th(m, k);
      const int vk = col_vm(m, k);
      const double vv = v[j] * v[k];
      // d2 p_j terms weighted by mp
      add(tj, tj, mp * vv * (-e));
      add(tj, tk, mp * vv * e);
      add(tk, tk, mp * vv * (-e));
      add(vj, vk, mp * e);
      add(tj, vj, mp * v[k] * (-f));
      add(tj, vk, mp * v[j] * (-f));
      add(tk, vj, mp * v[k] * f);
      add(tk, vk, mp * v[j] * f);
      // d2 q_j terms weighted by mq
      add(tj, tj, mq * vv * (-f));
      add(tj, tk, mq * vv * f);
      add(tk, tk, mq * vv * (-f));
      add(vj, vk, mq * f);
      add(tj, vj, mq * v[k] * e);
      add(tj, vk, mq * v[j] * e);
      add(tk, vj, mq * v[k] * (-e));
      add(tk, vk, mq * v[j] * (-e));
    }
  }
  return H;
}

}  // namespace gridmesh
