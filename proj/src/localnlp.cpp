#include "gridmesh/localnlp.hpp"

#include <cmath>

namespace gridmesh {

namespace {

// rho A'A + nu Sigma, the exact Hessian of the quadratic augmentation.
Eigen::MatrixXd augmentation_hessian(const LocalObjective& obj, int n) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  if (obj.rho != 0.0 && obj.A) H += obj.rho * obj.A->transpose() * (*obj.A);
  if (obj.nu != 0.0) {
    if (obj.sigma.size())
      H.diagonal() += obj.nu * obj.sigma;
    else
      H.diagonal().array() += obj.nu;
  }
  return H;
}

Eigen::VectorXd augmentation_gradient(const LocalObjective& obj, const Eigen::VectorXd& chi) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(chi.size());
  if (obj.lambda.size() && obj.A) g += obj.A->transpose() * obj.lambda;
  if (obj.zeta.size()) {
    const Eigen::VectorXd d = chi - obj.zeta;
    if (obj.rho != 0.0 && obj.A) g += obj.rho * obj.A->transpose() * (*obj.A * d);
    if (obj.nu != 0.0) {
      if (obj.sigma.size())
        g += obj.nu * obj.sigma.cwiseProduct(d);
      else
        g += obj.nu * d;
    }
  }
  return g;
}

double augmentation_value(const LocalObjective& obj, const Eigen::VectorXd& chi) {
  double v = 0.0;
  if (obj.lambda.size() && obj.A) v += obj.lambda.dot(*obj.A * chi);
  if (obj.zeta.size()) {
    const Eigen::VectorXd d = chi - obj.zeta;
    if (obj.rho != 0.0 && obj.A) v += 0.5 * obj.rho * (*obj.A * d).squaredNorm();
    if (obj.nu != 0.0) {
      if (obj.sigma.size())
        v += 0.5 * obj.nu * d.dot(obj.sigma.cwiseProduct(d));
      else
        v += 0.5 * obj.nu * d.squaredNorm();
    }
  }
  return v;
}

// stationarity can only be resolved down to the augmentation weights times
// machine precision, so inner tolerances are measured relative to this scale
double augmentation_scale(const LocalObjective& obj) {
  double s = 1.0 + obj.rho;
  if (obj.nu != 0.0) s += obj.nu * (obj.sigma.size() ? obj.sigma.maxCoeff() : 1.0);
  return s;
}

}  // namespace

double augmented_value(const LocalObjective& obj, const Eigen::VectorXd& chi) {
  double v = augmentation_value(obj, chi);
  if (obj.formulation == Formulation::LeastSquares) v += residual(*obj.model, chi).squaredNorm();
  return v;
}

Eigen::VectorXd augmented_gradient(const LocalObjective& obj, const Eigen::VectorXd& chi) {
  Eigen::VectorXd g = augmentation_gradient(obj, chi);
  if (obj.formulation == Formulation::LeastSquares)
    g += 2.0 * pf_jacobian(*obj.model, chi).transpose() * residual(*obj.model, chi);
  return g;
}

LocalResult solve_local_least_squares(const LocalObjective& obj, const Eigen::VectorXd& chi_start,
                                      double tol, int max_iter) {
  if (obj.formulation != Formulation::LeastSquares)
    throw SolveError("solve_local_least_squares needs the least-squares formulation");
  const RegionModel& m = *obj.model;
  if (chi_start.size() != m.n_state()) throw SolveError("local solver: state dimension mismatch");

  const int n = m.n_state();
  const double scale = augmentation_scale(obj);
  const Eigen::MatrixXd Haug = augmentation_hessian(obj, n);
  Eigen::VectorXd chi = chi_start;
  double value = augmented_value(obj, chi);
  double mu = 1e-4;

  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd r = residual(m, chi);
    const Eigen::MatrixXd J = pf_jacobian(m, chi);
    const Eigen::VectorXd g = 2.0 * J.transpose() * r + augmentation_gradient(obj, chi);
    if (g.lpNorm<Eigen::Infinity>() <= tol * scale) return {chi, Eigen::VectorXd(), it - 1};

    const Eigen::MatrixXd H = 2.0 * J.transpose() * J + Haug;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal().array() += mu;
      const Eigen::VectorXd step = Hd.ldlt().solve(-g);
      if (step.allFinite()) {
        const double trial = augmented_value(obj, chi + step);
        if (trial < value) {
          chi += step;
          value = trial;
          mu = std::max(mu / 10.0, 1e-12);
          accepted = true;
          break;
        }
      }
      mu *= 10.0;
      if (mu > 1e16) break;
    }
    if (!accepted) {
      // no descent representable in floating point; accept a numerical floor
      if (g.lpNorm<Eigen::Infinity>() <= 1e-6 * scale) return {chi, Eigen::VectorXd(), it};
      throw SolveError("local least-squares line search failed");
    }
  }
  const Eigen::VectorXd g = augmented_gradient(obj, chi);
  if (g.lpNorm<Eigen::Infinity>() <= 1e-6 * scale) return {chi, Eigen::VectorXd(), max_iter};
  throw SolveError("local least-squares solver hit the iteration limit");
}

LocalResult solve_local_feasibility(const LocalObjective& obj, const Eigen::VectorXd& chi_start,
                                    double tol, int max_iter) {
  if (obj.formulation != Formulation::Feasibility)
    throw SolveError("solve_local_feasibility needs the feasibility formulation");
  const RegionModel& m = *obj.model;
  if (chi_start.size() != m.n_state()) throw SolveError("local solver: state dimension mismatch");

  const int n = m.n_state();
  const int nc = m.n_residual();
  const double scale = augmentation_scale(obj);
  const Eigen::MatrixXd Haug = augmentation_hessian(obj, n);
  Eigen::VectorXd chi = chi_start;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(nc);

  auto kkt_residual = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& mult) {
    Eigen::VectorXd F(n + nc);
    F.head(n) = augmentation_gradient(obj, x) + pf_jacobian(m, x).transpose() * mult;
    F.tail(nc) = residual(m, x);
    return F;
  };
  // stationarity rows measured relative to the augmentation weights
  auto kkt_norm = [&](const Eigen::VectorXd& F) {
    return std::max(F.head(n).lpNorm<Eigen::Infinity>() / scale,
                    F.tail(nc).lpNorm<Eigen::Infinity>());
  };
  auto merit = [&](const Eigen::VectorXd& F) {
    return 0.5 * (F.head(n).squaredNorm() / (scale * scale) + F.tail(nc).squaredNorm());
  };

  // restoration phase: damped Gauss-Newton on ||residual||^2 alone, used to
  // land back on the constraint manifold when the merit line search stalls
  auto restore = [&](Eigen::VectorXd x) {
    double value = residual(m, x).squaredNorm();
    double mu = 1e-4;
    for (int it = 0; it < 200 && value > 1e-20; ++it) {
      const Eigen::VectorXd r = residual(m, x);
      const Eigen::MatrixXd J = pf_jacobian(m, x);
      const Eigen::VectorXd g = 2.0 * J.transpose() * r;
      if (g.lpNorm<Eigen::Infinity>() <= 1e-12) break;
      Eigen::MatrixXd H = 2.0 * J.transpose() * J;
      bool ok = false;
      for (int attempt = 0; attempt < 60; ++attempt) {
        Eigen::MatrixXd Hd = H;
        Hd.diagonal().array() += mu;
        const Eigen::VectorXd step = Hd.ldlt().solve(-g);
        if (step.allFinite()) {
          const double trial = residual(m, x + step).squaredNorm();
          if (trial < value) {
            x += step;
            value = trial;
            mu = std::max(mu / 10.0, 1e-12);
            ok = true;
            break;
          }
        }
        mu *= 10.0;
        if (mu > 1e16) break;
      }
      if (!ok) break;
    }
    return x;
  };

  bool restored = false;
  int creep = 0;  // consecutive iterations with a tiny accepted step
  Eigen::VectorXd F = kkt_residual(chi, gamma);
  for (int it = 1; it <= max_iter; ++it) {
    if (kkt_norm(F) <= tol) return {chi, gamma, it - 1};

    const Eigen::MatrixXd J = pf_jacobian(m, chi);
    const Eigen::MatrixXd Hexact = Haug + residual_hessian_contraction(m, chi, gamma);

    Eigen::VectorXd step;
    double tau = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + nc, n + nc);
      K.topLeftCorner(n, n) = Hexact;
      K.topLeftCorner(n, n).diagonal().array() += tau;
      K.topRightCorner(n, nc) = J.transpose();
      K.bottomLeftCorner(nc, n) = J;
      step = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(-F);
      if (step.allFinite()) break;
      tau = (tau == 0.0) ? 1e-8 : tau * 100.0;
    }
    if (!step.allFinite()) throw SolveError("singular KKT matrix in local feasibility solver");

    const double theta = merit(F);
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-12) {
      const Eigen::VectorXd xt = chi + alpha * step.head(n);
      const Eigen::VectorXd gt = gamma + alpha * step.tail(nc);
      const Eigen::VectorXd Ft = kkt_residual(xt, gt);
      if (merit(Ft) <= (1.0 - 1e-4 * alpha) * theta) {
        chi = xt;
        gamma = gt;
        F = Ft;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    creep = (accepted && alpha >= 1e-3) ? 0 : creep + 1;
    if (!accepted || creep >= 5) {
      if (kkt_norm(F) <= 1e-6) return {chi, gamma, it};
      if (!restored) {
        // the squared-KKT merit has near-stationary points away from any
        // KKT point; jump back onto the constraint manifold and resume
        restored = true;
        creep = 0;
        chi = restore(chi);
        gamma.setZero();
        F = kkt_residual(chi, gamma);
        continue;
      }
      throw SolveError("local feasibility line search failed");
    }
  }
  if (kkt_norm(F) <= 1e-6) return {chi, gamma, max_iter};
  throw SolveError("local feasibility solver hit the iteration limit");
}

Eigen::MatrixXd regularize_pd(Eigen::MatrixXd B, double delta_min) {
  B = ((B + B.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.eigenvalues().minCoeff() >= delta_min) return B;
  // flip negative eigenvalues instead of shifting: a uniform shift leaves
  // strongly concave directions at delta_min and the coordination step
  // explodes along them
  const Eigen::VectorXd d =
      es.eigenvalues().cwiseAbs().cwiseMax(delta_min);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd lagrangian_gradient(const RegionModel& m, Formulation f, const Eigen::VectorXd& chi,
                                    const Eigen::VectorXd& gamma) {
  const Eigen::MatrixXd J = pf_jacobian(m, chi);
  if (f == Formulation::LeastSquares) return 2.0 * J.transpose() * residual(m, chi);
  if (gamma.size() == 0) return Eigen::VectorXd::Zero(m.n_state());
  return J.transpose() * gamma;
}

HessianApprox::HessianApprox(HessianMethod method, double delta_min, int memory)
    : method_(method), delta_min_(delta_min), memory_(memory) {}

void HessianApprox::reset() {
  bfgs_.resize(0, 0);
  pairs_.clear();
  has_prev_ = false;
}

Eigen::MatrixXd HessianApprox::evaluate(
    const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn,
    const Eigen::MatrixXd* jacobian) {
  const int n = static_cast<int>(x.size());

  switch (method_) {
    case HessianMethod::GaussNewton: {
      if (!jacobian) throw SolveError("Gauss-Newton approximation needs the residual Jacobian");
      return regularize_pd(2.0 * jacobian->transpose() * (*jacobian), delta_min_);
    }

    case HessianMethod::FiniteDiff: {
      if (!grad_fn) throw SolveError("finite-difference approximation needs a gradient callback");
      const double h = 1e-6;
      Eigen::MatrixXd B(n, n);
      Eigen::VectorXd xp = x;
      for (int i = 0; i < n; ++i) {
        xp[i] = x[i] + h;
        const Eigen::VectorXd gp = grad_fn(xp);
        xp[i] = x[i] - h;
        const Eigen::VectorXd gm = grad_fn(xp);
        xp[i] = x[i];
        B.col(i) = (gp - gm) / (2.0 * h);
      }
      return regularize_pd(std::move(B), delta_min_);
    }

    case HessianMethod::BFGS: {
      if (bfgs_.rows() != n) {
        // seed with the Gauss-Newton matrix when a Jacobian is around;
        // the identity is off by orders of magnitude for these problems
        bfgs_ = jacobian ? Eigen::MatrixXd(2.0 * jacobian->transpose() * (*jacobian))
                         : Eigen::MatrixXd::Identity(n, n);
        has_prev_ = false;
      }
      if (has_prev_) {
        const Eigen::VectorXd s = x - prev_x_;
        const Eigen::VectorXd y = grad - prev_grad_;
        const double sy = s.dot(y);
        if (sy > 1e-8 * s.norm() * y.norm()) {
          const Eigen::VectorXd Bs = bfgs_ * s;
          bfgs_ += y * y.transpose() / sy - Bs * Bs.transpose() / s.dot(Bs);
        }
      }
      prev_x_ = x;
      prev_grad_ = grad;
      has_prev_ = true;
      return regularize_pd(bfgs_, delta_min_);
    }

    case HessianMethod::LBFGS: {
      if (has_prev_ && prev_x_.size() == n) {
        const Eigen::VectorXd s = x - prev_x_;
        const Eigen::VectorXd y = grad - prev_grad_;
        if (s.dot(y) > 1e-8 * s.norm() * y.norm()) {
          pairs_.emplace_back(s, y);
          if (static_cast<int>(pairs_.size()) > memory_) pairs_.pop_front();
        }
      }
      prev_x_ = x;
      prev_grad_ = grad;
      has_prev_ = true;

      // compact the memory into an explicit matrix by replaying the updates,
      // starting from the Gauss-Newton seed or the usual y'y/s'y scaling
      Eigen::MatrixXd B;
      if (jacobian) {
        B = 2.0 * jacobian->transpose() * (*jacobian);
      } else {
        double scale = 1.0;
        if (!pairs_.empty()) {
          const auto& [s, y] = pairs_.back();
          scale = y.squaredNorm() / s.dot(y);
        }
        B = scale * Eigen::MatrixXd::Identity(n, n);
      }
      for (const auto& [s, y] : pairs_) {
        const Eigen::VectorXd Bs = B * s;
        const double sBs = s.dot(Bs);
        if (sBs > 0.0) B += y * y.transpose() / s.dot(y) - Bs * Bs.transpose() / sBs;
      }
      return regularize_pd(std::move(B), delta_min_);
    }
  }
  throw SolveError("unknown Hessian method");
}

Eigen::MatrixXd hessian_approx(HessianApprox& h, const RegionModel& m, Formulation f,
                               const Eigen::VectorXd& chi, const Eigen::VectorXd& gamma) {
  if (h.method() == HessianMethod::GaussNewton && f == Formulation::Feasibility)
    throw SolveError("Gauss-Newton Hessian requires the least-squares formulation");
  const Eigen::VectorXd grad = lagrangian_gradient(m, f, chi, gamma);
  auto grad_fn = [&](const Eigen::VectorXd& x) { return lagrangian_gradient(m, f, x, gamma); };
  const Eigen::MatrixXd J = pf_jacobian(m, chi);
  return h.evaluate(chi, grad, grad_fn, &J);
}

}  // namespace gridmesh
