#pragma once

// Dense primal-dual interior-point method for convex quadratic programs
//
//   minimize    1/2 x'Qx + c'x
//   subject to  A x  = b
//               G x <= h
//
// using Mehrotra's predictor-corrector with a slack formulation Gx + s = h, s >= 0.
// The Newton system is reduced to the (n+p) saddle-point form
//
//   [ Q + G' diag(z/s) G   A' ] [dx]   [ -r_d - G' ((z*r_i - r_c) / s) ]
//   [ A                    0  ] [dy] = [ -r_p                          ]
//
// and factorized once per iteration; both the affine and the corrector direction
// reuse the factorization.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "calopf/errors.hpp"

namespace calopf {

struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

enum class QpStatus { optimal, infeasible, max_iterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max-iterations";
  }
  return "?";
}

struct QpOptions {
  double tol_kkt = 1e-8;        // infinity-norm bound on every KKT residual block
  double tol_gap = 1e-8;        // bound on the duality gap s'z
  int max_iter = 100;
  int verbosity = 0;
  double initial_slack = 1.0;   // lower bound on starting slacks
  double stall_threshold = 1e-6;
  int stall_iterations = 10;
  double step_fraction = 0.99;
  // Once progress stops, the best iterate is accepted if every residual is within this
  // factor of its tolerance.
  double acceptable_factor = 100.0;
  int no_progress_iterations = 5;
};

struct QpResult {
  Eigen::VectorXd x, y, z, s;
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  double dual_residual = 0.0;
  double primal_residual = 0.0;  // max of equality and inequality residuals
  double gap = 0.0;              // s'z
  double objective = 0.0;

  double kkt_residual() const { return std::max(dual_residual, primal_residual); }
};

/// Reusable solver instance; owns per-solve scratch. One solve at a time per instance.
class QpSolver {
 public:
  QpResult solve(const QpProblem& qp, const Eigen::VectorXd& x0, const QpOptions& opt = {}) {
    const Eigen::Index n = qp.c.size();
    const Eigen::Index p = qp.b.size();
    const Eigen::Index m = qp.h.size();

    QpResult res;
    res.x = x0;
    res.y = Eigen::VectorXd::Zero(p);
    res.s = (qp.h - qp.G * res.x).cwiseMax(opt.initial_slack);
    res.z = Eigen::VectorXd::Ones(m);

    const double scale_p = 1.0 + std::max(inf_norm(qp.b), inf_norm(qp.h));
    double prev_rho = std::numeric_limits<double>::infinity();
    int stalled = 0;
    QpResult best;
    double best_merit = std::numeric_limits<double>::infinity();
    int since_best = 0;
    auto accept_best = [&]() {
      if (!(best_merit <= opt.acceptable_factor)) return false;
      best.status = QpStatus::optimal;
      best.iterations = res.iterations;
      res = std::move(best);
      return true;
    };

    kkt_.resize(n + p, n + p);
    for (int it = 0;; ++it) {
      auto& x = res.x;
      auto& y = res.y;
      auto& z = res.z;
      auto& s = res.s;
      r_d_ = qp.Q * x + qp.c + qp.A.transpose() * y + qp.G.transpose() * z;
      r_p_ = qp.A * x - qp.b;
      r_i_ = qp.G * x + s - qp.h;
      const double gap = m > 0 ? s.dot(z) : 0.0;
      const double mu = m > 0 ? gap / static_cast<double>(m) : 0.0;

      res.iterations = it;
      res.dual_residual = inf_norm(r_d_);
      res.primal_residual = std::max(inf_norm(r_p_), inf_norm(r_i_));
      res.gap = gap;
      res.objective = 0.5 * x.dot(qp.Q * x) + qp.c.dot(x);

      const double merit = std::max({res.dual_residual / opt.tol_kkt, res.primal_residual / opt.tol_kkt, gap / opt.tol_gap});
      if (merit < best_merit) {
        best_merit = merit;
        best = res;
        since_best = 0;
      } else {
        ++since_best;
      }

      const double rho = res.primal_residual / scale_p;
      const bool diverged = !std::isfinite(res.dual_residual) || !std::isfinite(mu) || (m > 0 && inf_norm(z) > kDualBlowup);
      if (diverged || !std::isfinite(res.primal_residual)) {
        if (accept_best()) return res;
        // Unbounded duals with a stuck primal residual certify infeasibility.
        if (std::isfinite(rho) && rho > opt.stall_threshold) {
          res.status = QpStatus::infeasible;
          return res;
        }
        throw NumericalError("interior-point iterate became non-finite");
      }
      if (opt.verbosity > 0)
        std::fprintf(stderr, "ipm %3d  obj % .10e  rd %.2e  rp %.2e  mu %.2e\n", it, res.objective, res.dual_residual,
                     res.primal_residual, mu);

      if (res.dual_residual <= opt.tol_kkt && res.primal_residual <= opt.tol_kkt && gap <= opt.tol_gap) {
        res.status = QpStatus::optimal;
        return res;
      }
      // near-degenerate problems: the reduced system loses accuracy before the tolerances are met
      if (since_best >= opt.no_progress_iterations && accept_best()) return res;

      stalled = (rho > opt.stall_threshold && rho > 0.9 * prev_rho) ? stalled + 1 : 0;
      prev_rho = rho;
      if (stalled >= opt.stall_iterations) {
        res.status = QpStatus::infeasible;
        return res;
      }
      if (it >= opt.max_iter) {
        if (accept_best()) return res;
        res.status = QpStatus::max_iterations;
        return res;
      }

      // Assemble and factorize the reduced KKT matrix.
      d_ = z.cwiseQuotient(s);
      kkt_.setZero();
      kkt_.topLeftCorner(n, n) = qp.Q;
      kkt_.topLeftCorner(n, n).noalias() += qp.G.transpose() * d_.asDiagonal() * qp.G;
      kkt_.topRightCorner(n, p) = qp.A.transpose();
      kkt_.bottomLeftCorner(p, n) = qp.A;
      lu_.compute(kkt_);

      // Predictor.
      r_c_ = s.cwiseProduct(z);
      direction(s, z, qp);
      const double a_aff = max_step(s, ds_, z, dz_);
      const double mu_aff =
          m > 0 ? (s + a_aff * ds_).dot(z + a_aff * dz_) / static_cast<double>(m) : 0.0;
      const double sigma = mu > 0 ? std::min(1.0, std::pow(mu_aff / mu, 3)) : 0.0;

      // Corrector.
      r_c_ = s.cwiseProduct(z) + ds_.cwiseProduct(dz_) - Eigen::VectorXd::Constant(m, sigma * mu);
      direction(s, z, qp);
      const double alpha = std::min(1.0, opt.step_fraction * max_step(s, ds_, z, dz_));

      x += alpha * dx_;
      y += alpha * dy_;
      s += alpha * ds_;
      z += alpha * dz_;
    }
  }

 private:
  static constexpr double kDualBlowup = 1e14;

  static double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

  static double max_step(const Eigen::VectorXd& s, const Eigen::VectorXd& ds, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& dz) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (ds[i] < 0) a = std::min(a, -s[i] / ds[i]);
      if (dz[i] < 0) a = std::min(a, -z[i] / dz[i]);
    }
    return std::min(a, 1.0);
  }

  void direction(const Eigen::VectorXd& s, const Eigen::VectorXd& z, const QpProblem& qp) {
    const Eigen::Index n = qp.c.size();
    const Eigen::Index p = qp.b.size();
    rhs_.resize(n + p);
    rhs_.head(n) = -r_d_ - qp.G.transpose() * (z.cwiseProduct(r_i_) - r_c_).cwiseQuotient(s);
    rhs_.tail(p) = -r_p_;
    sol_ = lu_.solve(rhs_);
    dx_ = sol_.head(n);
    dy_ = sol_.tail(p);
    ds_ = -r_i_ - qp.G * dx_;
    dz_ = (-r_c_ - z.cwiseProduct(ds_)).cwiseQuotient(s);
  }

  Eigen::MatrixXd kkt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd r_d_, r_p_, r_i_, r_c_, d_, rhs_, sol_, dx_, dy_, ds_, dz_;
};

}  // namespace calopf
