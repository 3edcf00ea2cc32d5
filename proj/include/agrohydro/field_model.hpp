#pragma once

// Full-order forward model: explicit finite-difference integration of the
// cylindrical Richards equation with center-pivot surface forcing, free
// drainage at the bottom, a root-water sink, and optional additive noise.
//
// The head tendency at each node is
//
//   dh/dt = (div_i - extraction_i) / c(h_i)
//
// with div_i the finite-volume divergence of inter-node Darcy fluxes
// (radial 1/r d/dr(r K dh/dr), azimuthal 1/r^2-scaled, axial with unit
// gravity).  Face conductivities are arithmetic means by default.  The
// discrete divergence is assembled in flux form with exact annular face
// areas, so the closed-system water balance telescopes to zero up to the
// first-order time-stepping error.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "agrohydro/grid.hpp"
#include "agrohydro/soil.hpp"

namespace agrohydro {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

struct IntegrationError : std::runtime_error {
  int node;
  double time;
  IntegrationError(const std::string& what, int node_, double time_)
      : std::runtime_error(what), node(node_), time(time_) {}
};

/// Root water extraction settings; extraction rate is K_c * PET / L over
/// nodes shallower than the rooting depth L.
struct SinkConfig {
  double k_c = 0.0;         ///< crop coefficient [-]
  double pet = 0.0;         ///< reference evapotranspiration [m/s]
  double root_depth = 1.0;  ///< rooting depth L [m]
};

struct BoundaryConfig {
  enum class Surface { irrigation, no_flux };
  enum class Bottom { free_drainage, no_flux };
  Surface surface = Surface::irrigation;
  Bottom bottom = Bottom::free_drainage;
};

enum class FaceMean { arithmetic, geometric };

/// One irrigation episode with a constant application rate.
struct RateSegment {
  double t_start = 0.0;  ///< [s]
  double t_end = 0.0;    ///< [s]
  double rate = 0.0;     ///< [m/s] of applied water over the covered nodes
};

/// Rotating pivot arm.  The arm covers exactly one azimuthal column of
/// surface nodes at a time; all input entries outside that sector are
/// zero at any instant.
struct PivotSchedule {
  double angular_speed = 0.0;          ///< [rad/s]
  double phase0 = 0.0;                 ///< arm angle at t = 0 [rad]
  std::vector<RateSegment> segments;   ///< non-overlapping, rate >= 0
  std::vector<double> radial_weights;  ///< per-ring factor, empty = uniform

  bool on(double t) const { return rate_at(t) > 0.0; }

  double rate_at(double t) const {
    for (const auto& s : segments)
      if (t >= s.t_start && t < s.t_end) return s.rate;
    return 0.0;
  }

  int active_column(double t, const CylindricalGrid& g) const {
    const double two_pi = 2.0 * std::numbers::pi;
    double ang = std::fmod(phase0 + angular_speed * t, two_pi);
    if (ang < 0.0) ang += two_pi;
    int col = static_cast<int>(ang / g.dtheta);
    return col >= g.n_theta ? g.n_theta - 1 : col;
  }

  /// Surface input vector (length n_r * n_theta) at time t.
  void surface_input(double t, const CylindricalGrid& g, VectorXd& u) const {
    u.setZero(g.surface_count());
    const double rate = rate_at(t);
    if (rate <= 0.0) return;
    const int col = active_column(t, g);
    for (int ir = 0; ir < g.n_r; ++ir) {
      const double w = radial_weights.empty() ? 1.0 : radial_weights[ir];
      u[col * g.n_r + ir] = rate * w;
    }
  }

  /// Times where the applied input switches on or off (used by the
  /// input_change segmentation policy).
  std::vector<double> change_times() const {
    std::vector<double> ts;
    for (const auto& s : segments) {
      ts.push_back(s.t_start);
      ts.push_back(s.t_end);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
  }
};

/// Additive noise settings.  Stds are per sampling step of length dt_ref;
/// when a run uses a different dt the process perturbation is scaled by
/// sqrt(dt / dt_ref).  dt_ref <= 0 means "the dt of the run".
struct NoiseSpec {
  double process_std = 0.0;      ///< [m]
  double measurement_std = 0.0;  ///< [m]
  std::uint64_t seed = 0;
  double dt_ref = 0.0;           ///< [s]
};

/// Seeded N(0,1) streams; process and measurement draws are independent.
class NoiseStreams {
 public:
  explicit NoiseStreams(std::uint64_t seed)
      : process_(seed ^ 0x9e3779b97f4a7c15ull), measurement_(seed + 0x2545f4914f6cdd1dull) {}
  double process() { return normal_(process_); }
  double measurement() { return normal_(measurement_); }

 private:
  std::mt19937_64 process_, measurement_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

class FieldModel {
 public:
  FieldModel(CylindricalGrid grid, std::vector<SoilParams> soil,
             SinkConfig sink = {}, BoundaryConfig bc = {},
             FaceMean face_mean = FaceMean::arithmetic)
      : grid_(grid),
        soil_(std::move(soil)),
        sink_(sink),
        bc_(bc),
        face_mean_(face_mean) {
    if (static_cast<int>(soil_.size()) != grid_.size())
      throw std::invalid_argument("FieldModel: soil map size != node count");
    for (const auto& p : soil_) p.validate();
    if (sink_.k_c != 0.0 && !(sink_.root_depth > 0.0))
      throw std::invalid_argument("FieldModel: rooting depth must be positive");
  }

  const CylindricalGrid& grid() const { return grid_; }
  const std::vector<SoilParams>& soil() const { return soil_; }
  const SinkConfig& sink() const { return sink_; }

  /// Root extraction rate at a node [1/s], uniform ETP_p / L over the
  /// root zone and zero below it.
  double sink_rate(int node) const {
    const double etp_p = sink_.k_c * sink_.pet;
    if (etp_p == 0.0) return 0.0;
    const int iz = grid_.coords(node)[2];
    return grid_.depth_center(iz) <= sink_.root_depth ? etp_p / sink_.root_depth
                                                      : 0.0;
  }

  /// Head tendency dx/dt [m/s].  u has one entry per surface node.
  void rhs(const VectorXd& x, const VectorXd& u, VectorXd& dxdt) const {
    check_dims(x, u);
    const int n = grid_.size();
    buf_k_.resize(n);
    buf_c_.resize(n);
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(x[i]))
        throw IntegrationError("rhs: non-finite head at node " + std::to_string(i),
                               i, 0.0);
      buf_k_[i] = conductivity(x[i], soil_[i]);
      buf_c_[i] = capacity(x[i], soil_[i]);
    }
    dxdt.resize(n);
    const int per_layer = grid_.surface_count();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const auto [ir, it, iz] = grid_.coords(i);
      const double r_i = grid_.r_center(ir);
      double div = 0.0;
      // radial faces (face area vanishes on the axis; field edge is closed)
      if (ir + 1 < grid_.n_r) {
        const int j = i + 1;
        const double cf = ((ir + 1) * grid_.dr) / (r_i * grid_.dr * grid_.dr);
        div += cf * face_k(i, j) * (x[j] - x[i]);
      }
      if (ir > 0) {
        const int j = i - 1;
        const double cf = (ir * grid_.dr) / (r_i * grid_.dr * grid_.dr);
        div += cf * face_k(i, j) * (x[j] - x[i]);
      }
      // azimuthal faces, periodic
      if (grid_.n_theta > 1) {
        const double cf = 1.0 / (r_i * grid_.dtheta * r_i * grid_.dtheta);
        const int jn = grid_.flat(ir, (it + 1) % grid_.n_theta, iz);
        const int jp = grid_.flat(ir, (it + grid_.n_theta - 1) % grid_.n_theta, iz);
        div += cf * face_k(i, jn) * (x[jn] - x[i]);
        div += cf * face_k(i, jp) * (x[jp] - x[i]);
      }
      // axial faces: diffusive part plus unit gravity
      const double inv_dz = 1.0 / grid_.dz;
      const double inv_dz2 = inv_dz * inv_dz;
      if (iz > 0) {
        const int j = i - per_layer;  // shallower
        const double kf = face_k(i, j);
        div += inv_dz2 * kf * (x[j] - x[i]);
        div += inv_dz * kf;
      } else if (bc_.surface == BoundaryConfig::Surface::irrigation) {
        div += inv_dz * u[it * grid_.n_r + ir];  // infiltration through the surface
      }
      if (iz + 1 < grid_.n_z) {
        const int j = i + per_layer;  // deeper
        const double kf = face_k(i, j);
        div += inv_dz2 * kf * (x[j] - x[i]);
        div -= inv_dz * kf;
      } else if (bc_.bottom == BoundaryConfig::Bottom::free_drainage) {
        div -= inv_dz * buf_k_[i];  // unit-gradient outflow
      }
      dxdt[i] = (div - sink_rate(i)) / buf_c_[i];
    }
  }

  VectorXd rhs(const VectorXd& x, const VectorXd& u) const {
    VectorXd out;
    rhs(x, u, out);
    return out;
  }

  /// Analytic Jacobian of rhs with respect to the heads (sparse, 7-point
  /// stencil).  Validated against central differences in the test suite.
  void rhs_jacobian(const VectorXd& x, const VectorXd& u, SparseMat& jac) const {
    check_dims(x, u);
    const int n = grid_.size();
    buf_k_.resize(n);
    buf_c_.resize(n);
    buf_dk_.resize(n);
    buf_dc_.resize(n);
    VectorXd f(n);
    rhs(x, u, f);
    for (int i = 0; i < n; ++i) {
      buf_dk_[i] = conductivity_dh(x[i], soil_[i]);
      buf_dc_[i] = capacity_dh(x[i], soil_[i]);
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 7);
    const int per_layer = grid_.surface_count();
    for (int i = 0; i < n; ++i) {
      const auto [ir, it, iz] = grid_.coords(i);
      const double r_i = grid_.r_center(ir);
      double ddiv_ii = 0.0;
      auto diffusive = [&](int j, double cf) {
        const double kf = face_k(i, j);
        const double dh = x[j] - x[i];
        const auto [dkf_di, dkf_dj] = face_k_dh(i, j);
        ddiv_ii += cf * (dkf_di * dh - kf);
        trip.emplace_back(i, j, cf * (dkf_dj * dh + kf) / buf_c_[i]);
      };
      auto gravity = [&](int j, double sign) {
        const double inv_dz = 1.0 / grid_.dz;
        const auto [dkf_di, dkf_dj] = face_k_dh(i, j);
        ddiv_ii += sign * inv_dz * dkf_di;
        trip.emplace_back(i, j, sign * inv_dz * dkf_dj / buf_c_[i]);
      };
      if (ir + 1 < grid_.n_r)
        diffusive(i + 1, ((ir + 1) * grid_.dr) / (r_i * grid_.dr * grid_.dr));
      if (ir > 0) diffusive(i - 1, (ir * grid_.dr) / (r_i * grid_.dr * grid_.dr));
      if (grid_.n_theta > 1) {
        const double cf = 1.0 / (r_i * grid_.dtheta * r_i * grid_.dtheta);
        diffusive(grid_.flat(ir, (it + 1) % grid_.n_theta, iz), cf);
        diffusive(grid_.flat(ir, (it + grid_.n_theta - 1) % grid_.n_theta, iz), cf);
      }
      const double inv_dz2 = 1.0 / (grid_.dz * grid_.dz);
      if (iz > 0) {
        diffusive(i - per_layer, inv_dz2);
        gravity(i - per_layer, +1.0);
      }
      if (iz + 1 < grid_.n_z) {
        diffusive(i + per_layer, inv_dz2);
        gravity(i + per_layer, -1.0);
      } else if (bc_.bottom == BoundaryConfig::Bottom::free_drainage) {
        ddiv_ii -= buf_dk_[i] / grid_.dz;
      }
      // chain rule through the 1/c(h_i) factor
      const double diag = ddiv_ii / buf_c_[i] - f[i] * buf_dc_[i] / buf_c_[i];
      trip.emplace_back(i, i, diag);
    }
    jac.resize(n, n);
    jac.setFromTriplets(trip.begin(), trip.end());
  }

  /// One sampling step of length dt as `substeps` explicit Euler
  /// substeps with the input held constant.  Deterministic; noise is
  /// added by the caller.  Throws IntegrationError when the per-step
  /// head change exceeds max_step_change or goes non-finite.
  VectorXd step(const VectorXd& x, const VectorXd& u, double t, double dt,
                int substeps = 1) const {
    if (dt < 0.0) throw std::invalid_argument("step: dt must be >= 0");
    if (dt == 0.0) return x;
    if (substeps < 1) throw std::invalid_argument("step: substeps must be >= 1");
    VectorXd cur = x;
    VectorXd f;
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
      rhs(cur, u, f);
      cur += h * f;
    }
    monitor(x, cur, t + dt);
    return cur;
  }

  /// step() that also propagates a sensitivity block: S <- (dF/dx) S.
  VectorXd step_with_sensitivity(const VectorXd& x, const VectorXd& u, double t,
                                 double dt, int substeps, MatrixXd& sens) const {
    if (dt <= 0.0) throw std::invalid_argument("step_with_sensitivity: dt must be > 0");
    VectorXd cur = x;
    VectorXd f;
    SparseMat jac;
    const double h = dt / substeps;
    for (int s = 0; s < substeps; ++s) {
      rhs_jacobian(cur, u, jac);
      rhs(cur, u, f);
      sens += h * (jac * sens).eval();
      cur += h * f;
    }
    monitor(x, cur, t + dt);
    return cur;
  }

  double max_step_change = 0.5;  ///< stability monitor bound [m]

 private:
  void check_dims(const VectorXd& x, const VectorXd& u) const {
    if (x.size() != grid_.size())
      throw std::invalid_argument("state size " + std::to_string(x.size()) +
                                  " != node count " + std::to_string(grid_.size()));
    if (u.size() != grid_.surface_count())
      throw std::invalid_argument("input size " + std::to_string(u.size()) +
                                  " != surface node count " +
                                  std::to_string(grid_.surface_count()));
  }

  void monitor(const VectorXd& before, const VectorXd& after, double t) const {
    for (int i = 0; i < after.size(); ++i) {
      if (!std::isfinite(after[i]) || std::abs(after[i]) > 1e5)
        throw IntegrationError("integration diverged at node " + std::to_string(i) +
                                   ", t = " + std::to_string(t) + " s",
                               i, t);
      if (std::abs(after[i] - before[i]) > max_step_change)
        throw IntegrationError("head change " +
                                   std::to_string(std::abs(after[i] - before[i])) +
                                   " m exceeds monitor bound at node " +
                                   std::to_string(i) + ", t = " + std::to_string(t) +
                                   " s (reduce dt or raise substeps)",
                               i, t);
    }
  }

  double face_k(int i, int j) const {
    return face_mean_ == FaceMean::arithmetic
               ? 0.5 * (buf_k_[i] + buf_k_[j])
               : std::sqrt(buf_k_[i] * buf_k_[j]);
  }

  std::pair<double, double> face_k_dh(int i, int j) const {
    if (face_mean_ == FaceMean::arithmetic)
      return {0.5 * buf_dk_[i], 0.5 * buf_dk_[j]};
    const double kf = std::sqrt(buf_k_[i] * buf_k_[j]);
    return {0.5 * kf / buf_k_[i] * buf_dk_[i], 0.5 * kf / buf_k_[j] * buf_dk_[j]};
  }

  CylindricalGrid grid_;
  std::vector<SoilParams> soil_;
  SinkConfig sink_;
  BoundaryConfig bc_;
  FaceMean face_mean_;
  mutable std::vector<double> buf_k_, buf_c_, buf_dk_, buf_dc_;
};

/// Simulate from t0 to t1 at sampling interval dt; returns the snapshot
/// matrix with one column per sampling instant (t0 included).  With a
/// NoiseSpec, an i.i.d. head perturbation is added after every step; the
/// applied increments can be recorded for later replay.
inline MatrixXd simulate(const FieldModel& model, const VectorXd& x0,
                         const PivotSchedule& schedule, double t0, double t1,
                         double dt, int substeps, const NoiseSpec* noise = nullptr,
                         MatrixXd* noise_record = nullptr) {
  if (!(t1 > t0)) throw std::invalid_argument("simulate: t1 must exceed t0");
  const int steps = static_cast<int>(std::llround((t1 - t0) / dt));
  const int n = model.grid().size();
  MatrixXd traj(n, steps + 1);
  traj.col(0) = x0;
  NoiseStreams streams(noise ? noise->seed : 0);
  double w_scale = 0.0;
  if (noise && noise->process_std > 0.0) {
    const double ref = noise->dt_ref > 0.0 ? noise->dt_ref : dt;
    w_scale = noise->process_std * std::sqrt(dt / ref);
  }
  if (noise_record) noise_record->setZero(n, steps);
  VectorXd x = x0, u(model.grid().surface_count());
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * dt;
    schedule.surface_input(t, model.grid(), u);
    x = model.step(x, u, t, dt, substeps);
    if (w_scale > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double w = w_scale * streams.process();
        x[i] += w;
        if (noise_record) (*noise_record)(i, k) = w;
      }
    }
    traj.col(k + 1) = x;
  }
  return traj;
}

/// Exact sensor readout y = C x (0/1 selection rows).
inline VectorXd measure(const VectorXd& x, const NodeSet& sensors) {
  if (sensors.indices.empty())
    throw std::invalid_argument("measure: empty sensor set");
  VectorXd y(static_cast<int>(sensors.indices.size()));
  for (std::size_t s = 0; s < sensors.indices.size(); ++s)
    y[static_cast<int>(s)] = x[sensors.indices[s]];
  return y;
}

/// Noisy sensor readout; draws come from the caller's measurement stream.
inline VectorXd measure(const VectorXd& x, const NodeSet& sensors, double std_dev,
                        NoiseStreams& streams) {
  VectorXd y = measure(x, sensors);
  if (std_dev > 0.0)
    for (int i = 0; i < y.size(); ++i) y[i] += std_dev * streams.measurement();
  return y;
}

}  // namespace agrohydro
