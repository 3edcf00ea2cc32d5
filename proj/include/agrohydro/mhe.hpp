#pragma once

// Moving-horizon state estimation.  One window problem class covers both
// the full-order estimator and the adaptive reduced estimator: dynamics
// enter by single shooting (decision variables are the window-start state
// and the per-step process-noise sequence), measurements are scaled
// selection rows, and the arrival term anchors the window start to the
// sliding prior.  The adaptive driver regenerates the trajectory
// clustering and projection every step and solves in the reduced
// coordinates, reconstructing full states afterwards.

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "agrohydro/field_model.hpp"
#include "agrohydro/nls.hpp"
#include "agrohydro/reduction.hpp"

namespace agrohydro {

/// Arrival-cost diagonal P = l * diag(0.5 (x_lb - x_ub))^2.
inline VectorXd build_p(const VectorXd& x_lb, const VectorXd& x_ub, double l) {
  if (x_lb.size() != x_ub.size())
    throw std::invalid_argument("build_p: bound size mismatch");
  if (!(l > 0.0)) throw std::invalid_argument("build_p: scale l must be positive");
  VectorXd p(x_lb.size());
  for (int i = 0; i < p.size(); ++i) {
    if (!(x_lb[i] < x_ub[i]))
      throw std::invalid_argument("build_p: need x_lb < x_ub elementwise");
    const double m = 0.5 * (x_lb[i] - x_ub[i]);
    p[i] = l * m * m;
  }
  return p;
}

/// Reduced weight diagonals (P_r, Q_r) = (U^T P U, U^T Q U) for diagonal
/// P, Q; each entry is the mean of the member entries of its cluster.
inline std::pair<VectorXd, VectorXd> project_weights(const ProjectionMap& u,
                                                     const VectorXd& p_diag,
                                                     const VectorXd& q_diag) {
  return {u.project_diag(p_diag), u.project_diag(q_diag)};
}

/// y_s = weight[s] * state[index[s]]  (C for the full model, C U for a
/// reduced one).
struct MeasurementMap {
  std::vector<int> index;
  std::vector<double> weight;
  int size() const { return static_cast<int>(index.size()); }
};

/// Discrete dynamics plus everything the window solver needs, in one
/// coordinate system (full or reduced).
struct MheModel {
  int dim = 0;
  /// s+ = F_d(s, u, t)
  std::function<VectorXd(const VectorXd&, const VectorXd&, double)> step;
  /// same, also propagating sens <- (dF_d/ds) sens
  std::function<VectorXd(const VectorXd&, const VectorXd&, double, MatrixXd&)>
      step_sens;
  MeasurementMap meas;
  VectorXd s_lb, s_ub;          ///< state box at the window start
  VectorXd w_lb, w_ub;          ///< process-noise box; equal bounds drop w
  VectorXd p_diag, q_diag, r_diag;
};

struct MheWindow {
  double t_start = 0.0;
  double dt = 0.0;
  std::vector<VectorXd> y;  ///< measurements, window length + 1 entries
  std::vector<VectorXd> u;  ///< applied inputs, one per step
  VectorXd prior;           ///< window-start prior (same coordinates as model)
};

struct MheSolution {
  VectorXd s0;
  std::vector<VectorXd> w;
  std::vector<VectorXd> states;  ///< smoothed states s_0..s_Nw
  double objective = 0.0;
  NlsResult nls;
};

namespace detail {

inline void propagate_states(const MheModel& m, const MheWindow& win,
                             const VectorXd& z, bool has_w,
                             std::vector<VectorXd>& states) {
  const int nw = static_cast<int>(win.u.size());
  const int d = m.dim;
  states.resize(nw + 1);
  states[0] = z.head(d);
  for (int j = 0; j < nw; ++j) {
    states[j + 1] = m.step(states[j], win.u[j], win.t_start + j * win.dt);
    if (has_w) states[j + 1] += z.segment(d * (j + 1), d);
  }
}

}  // namespace detail

/// Solve one horizon-window problem.  Decision variables: window-start
/// state plus (unless the w box is degenerate at zero) one process-noise
/// vector per step.  Objective blocks are Q^-1-, R^-1- and P^-1-weighted
/// squared residuals.
inline MheSolution solve_window(const MheModel& m, const MheWindow& win,
                                const NlsOptions& opt,
                                const VectorXd* warm_start = nullptr) {
  const int d = m.dim;
  const int nw = static_cast<int>(win.u.size());
  if (static_cast<int>(win.y.size()) != nw + 1)
    throw std::invalid_argument("solve_window: need one measurement per window instant");
  if (win.prior.size() != d)
    throw std::invalid_argument("solve_window: prior dimension mismatch");
  const int ny = m.meas.size();
  if (ny == 0) throw std::invalid_argument("solve_window: no sensors");

  const bool has_w = nw > 0 && (m.w_lb.array() != m.w_ub.array()).any();
  const int nz = has_w ? d * (nw + 1) : d;
  const int nres = (has_w ? d * nw : 0) + ny * (nw + 1) + d;

  const VectorXd q_is = m.q_diag.cwiseSqrt().cwiseInverse();
  const VectorXd r_is = m.r_diag.cwiseSqrt().cwiseInverse();
  const VectorXd p_is = m.p_diag.cwiseSqrt().cwiseInverse();

  NlsProblem prob;
  prob.n_vars = nz;
  prob.n_residuals = nres;
  prob.lb.setConstant(nz, -std::numeric_limits<double>::infinity());
  prob.ub.setConstant(nz, std::numeric_limits<double>::infinity());
  prob.lb.head(d) = m.s_lb;
  prob.ub.head(d) = m.s_ub;
  if (has_w)
    for (int j = 0; j < nw; ++j) {
      prob.lb.segment(d * (j + 1), d) = m.w_lb;
      prob.ub.segment(d * (j + 1), d) = m.w_ub;
    }

  prob.residuals = [&, d, nw, ny, has_w](const VectorXd& z, VectorXd& r) {
    std::vector<VectorXd> states;
    detail::propagate_states(m, win, z, has_w, states);
    r.resize(nres);
    int row = 0;
    if (has_w)
      for (int j = 0; j < nw; ++j, row += d)
        r.segment(row, d) = q_is.cwiseProduct(z.segment(d * (j + 1), d));
    for (int j = 0; j <= nw; ++j)
      for (int s = 0; s < ny; ++s, ++row)
        r[row] = r_is[s] *
                 (m.meas.weight[s] * states[j][m.meas.index[s]] - win.y[j][s]);
    r.segment(row, d) = p_is.cwiseProduct(z.head(d) - win.prior);
  };

  prob.jacobian = [&, d, nw, ny, has_w](const VectorXd& z, MatrixXd& jac) {
    jac.setZero(nres, nz);
    // forward sensitivity of the state chain w.r.t. all decision variables
    VectorXd s = z.head(d);
    MatrixXd sens = MatrixXd::Zero(d, nz);
    sens.leftCols(d).setIdentity();
    int row = 0;
    if (has_w)
      for (int j = 0; j < nw; ++j, row += d)
        jac.block(row, d * (j + 1), d, d).diagonal() = q_is;
    auto meas_rows = [&](const MatrixXd& sj) {
      for (int s_i = 0; s_i < ny; ++s_i, ++row)
        jac.row(row) =
            (r_is[s_i] * m.meas.weight[s_i]) * sj.row(m.meas.index[s_i]);
    };
    meas_rows(sens);
    for (int j = 0; j < nw; ++j) {
      s = m.step_sens(s, win.u[j], win.t_start + j * win.dt, sens);
      if (has_w) {
        s += z.segment(d * (j + 1), d);
        sens.middleCols(d * (j + 1), d).diagonal().array() += 1.0;
      }
      meas_rows(sens);
    }
    jac.block(row, 0, d, d).diagonal() = p_is;
  };

  VectorXd z0(nz);
  if (warm_start && warm_start->size() == nz) {
    z0 = *warm_start;
  } else {
    z0.setZero();
    z0.head(d) = win.prior;
  }

  NlsResult nr = solve_nls(prob, z0, opt);

  MheSolution sol;
  sol.nls = nr;
  sol.objective = nr.objective;
  sol.s0 = nr.x.head(d);
  if (has_w) {
    sol.w.resize(nw);
    for (int j = 0; j < nw; ++j) sol.w[j] = nr.x.segment(d * (j + 1), d);
  }
  detail::propagate_states(m, win, nr.x, has_w, sol.states);
  return sol;
}

struct EstimateStep {
  int k = 0;
  double t = 0.0;
  VectorXd x_hat;    ///< filtered estimate in full coordinates
  VectorXd xi_hat;   ///< reduced filtered estimate (adaptive only)
  int num_clusters = 0;
  double objective = 0.0;
  double solve_ms = 0.0;  ///< wall time of everything this step did
  int iterations = 0;
};

/// Shared settings for both estimators.
struct EstimatorSettings {
  int horizon = 3;             ///< N
  double l = 1.0;              ///< P scale
  double q_value = 1e-6;       ///< Q diagonal (full-order, per node)
  double r_value = 0.01;       ///< R diagonal (per sensor)
  double x_lb = -10.0;         ///< state box [m]
  double x_ub = 0.0;
  double w_bound_sigmas = 6.0; ///< process-noise box half-width in stds
  double sigma_w = 0.0;        ///< assumed process-noise std [m]
  double threshold = 0.05;     ///< clustering distance threshold (adaptive)
  NlsOptions nls;
};

namespace detail {

struct WindowBuffers {
  std::vector<VectorXd> y, u;
  std::vector<double> t;
};

}  // namespace detail

/// Full-order moving-horizon estimator (full-information while k < N).
class FullOrderMhe {
 public:
  FullOrderMhe(const FieldModel& model, NodeSet sensors, EstimatorSettings cfg,
               double dt, int substeps, VectorXd prior0)
      : model_(&model),
        sensors_(std::move(sensors)),
        cfg_(cfg),
        dt_(dt),
        substeps_(substeps),
        prior0_(std::move(prior0)) {
    if (sensors_.indices.empty())
      throw std::invalid_argument("FullOrderMhe: empty sensor set");
    const int n = model.grid().size();
    x_lb_ = VectorXd::Constant(n, cfg.x_lb);
    x_ub_ = VectorXd::Constant(n, cfg.x_ub);
    p_diag_ = build_p(x_lb_, x_ub_, cfg.l);
    q_diag_ = VectorXd::Constant(n, cfg.q_value);
    r_diag_ = VectorXd::Constant(static_cast<int>(sensors_.indices.size()),
                                 cfg.r_value);
    const double wb = cfg.w_bound_sigmas * cfg.sigma_w;
    w_lb_ = VectorXd::Constant(n, -wb);
    w_ub_ = VectorXd::Constant(n, wb);
  }

  /// Process the measurement at step k (k consecutive from 0).
  EstimateStep process(int k, const VectorXd& y,
                       const std::function<VectorXd(double)>& input_at) {
    const auto tic = std::chrono::steady_clock::now();
    push_history(k, y, input_at);
    const int start = window_start(k);
    const int nw = k - start;

    MheModel m;
    m.dim = model_->grid().size();
    m.step = [this](const VectorXd& s, const VectorXd& u, double t) {
      return model_->step(s, u, t, dt_, substeps_);
    };
    m.step_sens = [this](const VectorXd& s, const VectorXd& u, double t,
                         MatrixXd& sens) {
      return model_->step_with_sensitivity(s, u, t, dt_, substeps_, sens);
    };
    m.meas.index = sensors_.indices;
    m.meas.weight.assign(sensors_.indices.size(), 1.0);
    m.s_lb = x_lb_;
    m.s_ub = x_ub_;
    m.w_lb = w_lb_;
    m.w_ub = w_ub_;
    m.p_diag = p_diag_;
    m.q_diag = q_diag_;
    m.r_diag = r_diag_;

    MheWindow win;
    win.t_start = times_[start];
    win.dt = dt_;
    win.prior = (start == 0) ? prior0_ : filtered_[start];
    for (int j = start; j <= k; ++j) win.y.push_back(meas_[j]);
    for (int j = start; j < k; ++j) win.u.push_back(inputs_[j]);

    const bool has_w = nw > 0 && cfg_.w_bound_sigmas * cfg_.sigma_w > 0.0;
    VectorXd warm;
    if (warm_.size() > 0) {
      const int d = m.dim;
      const int nz = has_w ? d * (nw + 1) : d;
      warm.setZero(nz);
      warm.head(d) = warm_start_state_;
      if (has_w && warm_w_.size() > 0) {
        const int copy = std::min<int>(nw, static_cast<int>(warm_w_.size()));
        for (int j = 0; j < copy; ++j)
          warm.segment(d * (j + 1), d) = warm_w_[j];
      }
    }

    MheSolution sol = solve_window(m, win, cfg_.nls, warm.size() ? &warm : nullptr);
    if (!sol.nls.converged())
      throw std::runtime_error(
          "full-order MHE: solver hit the iteration cap (objective " +
          std::to_string(sol.objective) + ", projected gradient " +
          std::to_string(sol.nls.grad_norm) + ")");

    filtered_[k] = sol.states.back();
    // warm start for the next window: while the window is still growing
    // (k + 1 <= N) its start stays at 0, afterwards it slides by one step
    warm_ = sol.nls.x;
    const bool slides = k + 1 > cfg_.horizon;
    warm_start_state_ = (slides && nw > 0) ? sol.states[1] : sol.states[0];
    warm_w_.clear();
    for (std::size_t j = slides ? 1 : 0; j < sol.w.size(); ++j)
      warm_w_.push_back(sol.w[j]);

    EstimateStep rec;
    rec.k = k;
    rec.t = times_[k];
    rec.x_hat = sol.states.back();
    rec.num_clusters = m.dim;
    rec.objective = sol.objective;
    rec.iterations = sol.nls.iterations;
    rec.solve_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - tic)
                       .count();
    return rec;
  }

 private:
  int window_start(int k) const { return std::max(0, k - cfg_.horizon); }

  void push_history(int k, const VectorXd& y,
                    const std::function<VectorXd(double)>& input_at) {
    if (k != static_cast<int>(meas_.size()))
      throw std::invalid_argument("process: steps must be consecutive from 0");
    const double t = k * dt_;
    times_.push_back(t);
    meas_.push_back(y);
    if (k > 0) inputs_[k - 1] = input_at(times_[k - 1]);
    inputs_.push_back(VectorXd());
    filtered_.push_back(VectorXd());
  }

  const FieldModel* model_;
  NodeSet sensors_;
  EstimatorSettings cfg_;
  double dt_;
  int substeps_;
  VectorXd prior0_;
  VectorXd x_lb_, x_ub_, w_lb_, w_ub_, p_diag_, q_diag_, r_diag_;
  std::vector<double> times_;
  std::vector<VectorXd> meas_, inputs_, filtered_;
  VectorXd warm_, warm_start_state_;
  std::vector<VectorXd> warm_w_;
};

/// Adaptive reduced-order moving-horizon estimator: every step simulates
/// the nominal model from the sliding prior to refresh the snapshot
/// matrix, re-clusters, projects the problem and solves it in reduced
/// coordinates.
class AdaptiveMhe {
 public:
  AdaptiveMhe(const FieldModel& model, NodeSet sensors, EstimatorSettings cfg,
              double dt, int substeps, VectorXd prior0)
      : model_(&model),
        sensors_(std::move(sensors)),
        cfg_(cfg),
        dt_(dt),
        substeps_(substeps),
        prior0_(std::move(prior0)) {
    if (sensors_.indices.empty())
      throw std::invalid_argument("AdaptiveMhe: empty sensor set");
    const int n = model.grid().size();
    x_lb_ = VectorXd::Constant(n, cfg.x_lb);
    x_ub_ = VectorXd::Constant(n, cfg.x_ub);
    p_diag_ = build_p(x_lb_, x_ub_, cfg.l);
    q_diag_ = VectorXd::Constant(n, cfg.q_value);
    r_diag_ = VectorXd::Constant(static_cast<int>(sensors_.indices.size()),
                                 cfg.r_value);
  }

  EstimateStep process(int k, const VectorXd& y,
                       const std::function<VectorXd(double)>& input_at) {
    const auto tic = std::chrono::steady_clock::now();
    push_history(k, y, input_at);
    const int start = window_start(k);
    const int nw = k - start;
    const VectorXd& prior_full = (start == 0) ? prior0_ : filtered_[start];

    // snapshot matrix from the nominal model seeded by the prior (never
    // the true state): columns at window instants plus one beyond
    MatrixXd snap(model_->grid().size(), nw + 2);
    snap.col(0) = prior_full;
    VectorXd xs = prior_full;
    for (int j = 0; j <= nw; ++j) {
      const double t = times_[start] + j * dt_;
      xs = model_->step(xs, inputs_at(t), t, dt_, substeps_);
      snap.col(j + 1) = xs;
    }

    ClusterSet cs = cluster_trajectories(snap, cfg_.threshold);
    ProjectionMap u_map(cs);
    const int r = u_map.cols();

    MheModel m;
    m.dim = r;
    m.step = [this, &u_map](const VectorXd& xi, const VectorXd& u, double t) {
      return reduced_step(*model_, u_map, xi, u, t, dt_, substeps_);
    };
    m.step_sens = [this, &u_map](const VectorXd& xi, const VectorXd& u, double t,
                                 MatrixXd& sens) {
      MatrixXd full_sens = u_map.lift_block(sens);
      const VectorXd x_next = model_->step_with_sensitivity(
          u_map.lift(xi), u, t, dt_, substeps_, full_sens);
      sens = u_map.project_block(full_sens);
      return u_map.project(x_next);
    };
    m.meas.index.resize(sensors_.indices.size());
    m.meas.weight.resize(sensors_.indices.size());
    for (std::size_t s = 0; s < sensors_.indices.size(); ++s) {
      const int cl = u_map.cluster_of(sensors_.indices[s]);
      m.meas.index[s] = cl;
      m.meas.weight[s] = u_map.weight(cl);
    }
    auto [p_r, q_r] = project_weights(u_map, p_diag_, q_diag_);
    m.p_diag = p_r;
    m.q_diag = q_r;
    m.r_diag = r_diag_;
    // structure preservation: cluster-wise constant bounds map to
    // sqrt(|C|)-scaled reduced bounds
    m.s_lb.resize(r);
    m.s_ub.resize(r);
    m.w_lb.resize(r);
    m.w_ub.resize(r);
    const double wb = cfg_.w_bound_sigmas * cfg_.sigma_w;
    for (int j = 0; j < r; ++j) {
      const double scale = 1.0 / u_map.weight(j);  // sqrt(|C_j|)
      m.s_lb[j] = scale * cfg_.x_lb;
      m.s_ub[j] = scale * cfg_.x_ub;
      m.w_lb[j] = -scale * wb;
      m.w_ub[j] = scale * wb;
    }

    MheWindow win;
    win.t_start = times_[start];
    win.dt = dt_;
    win.prior = u_map.project(prior_full);
    for (int j = start; j <= k; ++j) win.y.push_back(meas_[j]);
    for (int j = start; j < k; ++j) win.u.push_back(inputs_[j]);

    MheSolution sol = solve_window(m, win, cfg_.nls);
    if (!sol.nls.converged())
      throw std::runtime_error(
          "adaptive MHE: solver hit the iteration cap (objective " +
          std::to_string(sol.objective) + ", projected gradient " +
          std::to_string(sol.nls.grad_norm) + ")");

    filtered_[k] = u_map.lift(sol.states.back());

    EstimateStep rec;
    rec.k = k;
    rec.t = times_[k];
    rec.xi_hat = sol.states.back();
    rec.x_hat = filtered_[k];
    rec.num_clusters = r;
    rec.objective = sol.objective;
    rec.iterations = sol.nls.iterations;
    rec.solve_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - tic)
                       .count();
    return rec;
  }

 private:
  int window_start(int k) const { return std::max(0, k - cfg_.horizon); }

  const VectorXd& inputs_at(double t) const {
    const int idx = static_cast<int>(std::llround(t / dt_));
    if (idx >= 0 && idx < static_cast<int>(inputs_.size()) &&
        inputs_[idx].size() > 0)
      return inputs_[idx];
    scratch_u_ = input_fn_(t);
    return scratch_u_;
  }

  void push_history(int k, const VectorXd& y,
                    const std::function<VectorXd(double)>& input_at) {
    if (k != static_cast<int>(meas_.size()))
      throw std::invalid_argument("process: steps must be consecutive from 0");
    input_fn_ = input_at;
    times_.push_back(k * dt_);
    meas_.push_back(y);
    if (k > 0) inputs_[k - 1] = input_at(times_[k - 1]);
    inputs_.push_back(VectorXd());
    filtered_.push_back(VectorXd());
  }

  const FieldModel* model_;
  NodeSet sensors_;
  EstimatorSettings cfg_;
  double dt_;
  int substeps_;
  VectorXd prior0_;
  VectorXd x_lb_, x_ub_, p_diag_, q_diag_, r_diag_;
  std::vector<double> times_;
  std::vector<VectorXd> meas_, inputs_, filtered_;
  std::function<VectorXd(double)> input_fn_;
  mutable VectorXd scratch_u_;
};

}  // namespace agrohydro
