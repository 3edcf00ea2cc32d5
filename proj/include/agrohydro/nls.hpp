#pragma once

// Bound-constrained nonlinear least squares: Gauss-Newton with Levenberg
// damping and an active-set treatment of box constraints.  Variables at
// a bound whose gradient pushes outward are frozen for the step; the
// candidate is projected onto the box and accepted on objective decrease
// (backtracking on failure).  Deterministic for fixed inputs.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace agrohydro {

struct NlsOptions {
  double tol_g = 1e-8;    ///< projected-gradient infinity norm
  double tol_x = 1e-12;   ///< relative step size
  int max_iter = 60;
  double lambda0 = 0.0;   ///< initial Levenberg damping
};

enum class NlsStatus { gradient_tol, step_tol, max_iterations };

struct NlsResult {
  Eigen::VectorXd x;
  double objective = 0.0;       ///< sum of squared residuals at x
  int iterations = 0;
  NlsStatus status = NlsStatus::max_iterations;
  double grad_norm = 0.0;       ///< projected gradient, infinity norm
  double kkt_violation = 0.0;   ///< max multiplier-sign violation at active bounds
  int active_bounds = 0;

  bool converged() const { return status != NlsStatus::max_iterations; }
};

struct NlsProblem {
  int n_residuals = 0;
  int n_vars = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residuals;
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
  Eigen::VectorXd lb, ub;  ///< empty = unbounded
};

inline NlsResult solve_nls(const NlsProblem& prob, const Eigen::VectorXd& x0,
                           const NlsOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = prob.n_vars;
  const double inf = std::numeric_limits<double>::infinity();
  VectorXd lb = prob.lb.size() ? prob.lb : VectorXd::Constant(n, -inf);
  VectorXd ub = prob.ub.size() ? prob.ub : VectorXd::Constant(n, inf);
  if (lb.size() != n || ub.size() != n || x0.size() != n)
    throw std::invalid_argument("solve_nls: dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (lb[i] > ub[i]) throw std::invalid_argument("solve_nls: lb > ub");

  auto clamp = [&](VectorXd v) {
    for (int i = 0; i < n; ++i) v[i] = std::min(std::max(v[i], lb[i]), ub[i]);
    return v;
  };

  NlsResult res;
  VectorXd x = clamp(x0);
  VectorXd r(prob.n_residuals), r_new(prob.n_residuals);
  MatrixXd jac(prob.n_residuals, n);
  MatrixXd hess(n, n);
  prob.residuals(x, r);
  double f = r.squaredNorm();
  if (!std::isfinite(f)) throw std::runtime_error("solve_nls: non-finite initial residuals");
  double lambda = opt.lambda0;

  const double bound_eps = 1e-12;
  std::vector<char> active(n);
  for (int it = 1; it <= opt.max_iter; ++it) {
    res.iterations = it;
    prob.jacobian(x, jac);
    const VectorXd g = jac.transpose() * r;  // 1/2 gradient of ||r||^2

    int n_active = 0;
    double pg_norm = 0.0, kkt = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool at_lb = x[i] <= lb[i] + bound_eps * (1.0 + std::abs(lb[i]));
      const bool at_ub = x[i] >= ub[i] - bound_eps * (1.0 + std::abs(ub[i]));
      active[i] = (at_lb && g[i] > 0.0) || (at_ub && g[i] < 0.0) || lb[i] == ub[i];
      if (active[i]) {
        ++n_active;
        // multiplier is |g_i|; a wrong-signed gradient at a bound counts
        // as violation
        if ((at_lb && g[i] < 0.0) || (at_ub && g[i] > 0.0))
          kkt = std::max(kkt, std::abs(g[i]));
      } else {
        pg_norm = std::max(pg_norm, std::abs(g[i]));
      }
    }
    res.grad_norm = pg_norm;
    res.kkt_violation = kkt;
    res.active_bounds = n_active;
    if (pg_norm < opt.tol_g) {
      res.status = NlsStatus::gradient_tol;
      break;
    }

    hess.setZero();
    hess.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());

    // free-variable index map
    std::vector<int> free;
    free.reserve(n);
    for (int i = 0; i < n; ++i)
      if (!active[i]) free.push_back(i);
    const int nf = static_cast<int>(free.size());
    VectorXd gf(nf);
    for (int i = 0; i < nf; ++i) gf[i] = g[free[i]];
    MatrixXd hf;
    const bool all_free = (nf == n);
    if (!all_free) {
      hf.resize(nf, nf);
      for (int a = 0; a < nf; ++a)
        for (int b = 0; b <= a; ++b) hf(a, b) = hess(free[a], free[b]);
    }

    bool accepted = false;
    for (int tries = 0; tries < 25 && !accepted; ++tries) {
      MatrixXd h = all_free ? hess : hf;
      if (lambda > 0.0)
        for (int i = 0; i < nf; ++i)
          h(i, i) += lambda * std::max(h(i, i), 1e-12);
      Eigen::LDLT<MatrixXd> ldlt(h.selfadjointView<Eigen::Lower>());
      VectorXd step_f = ldlt.solve(-gf);
      if (ldlt.info() != Eigen::Success || !step_f.allFinite()) {
        lambda = std::max(10.0 * lambda, 1e-6);
        continue;
      }
      VectorXd step = VectorXd::Zero(n);
      for (int i = 0; i < nf; ++i) step[free[i]] = step_f[i];

      // projected backtracking line search
      double alpha = 1.0;
      for (int ls = 0; ls < 30; ++ls) {
        const VectorXd x_new = clamp(x + alpha * step);
        prob.residuals(x_new, r_new);
        const double f_new = r_new.squaredNorm();
        if (std::isfinite(f_new) && f_new < f) {
          const double dx = (x_new - x).lpNorm<Eigen::Infinity>();
          x = x_new;
          r = r_new;
          f = f_new;
          accepted = true;
          lambda *= 0.25;
          if (lambda < 1e-14) lambda = 0.0;
          if (dx < opt.tol_x * (1.0 + x.lpNorm<Eigen::Infinity>())) {
            res.status = NlsStatus::step_tol;
          }
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) lambda = std::max(10.0 * lambda, 1e-6);
    }
    if (!accepted) {
      // no decrease found in any damped direction: treat as stationary
      res.status = NlsStatus::step_tol;
    }
    if (res.status != NlsStatus::max_iterations) break;
  }

  res.x = x;
  res.objective = f;
  return res;
}

}  // namespace agrohydro
