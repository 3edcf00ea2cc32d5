#pragma once

// Structure-preserving adaptive model reduction: operating-region
// segmentation, trajectory clustering, the cluster-indicator projection
// matrix with unit-norm columns, reduced-model evaluation and the
// lift/re-project handoff between the reduced models of adjacent regions.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "agrohydro/clustering.hpp"
#include "agrohydro/field_model.hpp"

namespace agrohydro {

/// Ordered time intervals covering [t0, t1]; overlap only at boundaries.
struct OperatingRegions {
  std::vector<std::pair<double, double>> intervals;
};

enum class SegmentPolicy { per_step, fixed_window, input_change };

inline OperatingRegions segment_regions(const PivotSchedule& schedule, double t0,
                                        double t1, double dt,
                                        SegmentPolicy policy,
                                        double window = 0.0) {
  if (!(t1 > t0)) throw std::invalid_argument("segment_regions: empty horizon");
  OperatingRegions out;
  switch (policy) {
    case SegmentPolicy::per_step: {
      const int steps = static_cast<int>(std::llround((t1 - t0) / dt));
      for (int k = 0; k < steps; ++k)
        out.intervals.emplace_back(t0 + k * dt, t0 + (k + 1) * dt);
      break;
    }
    case SegmentPolicy::fixed_window: {
      if (!(window > 0.0))
        throw std::invalid_argument("segment_regions: window must be positive");
      double t = t0;
      while (t < t1 - 1e-9 * (t1 - t0)) {
        out.intervals.emplace_back(t, std::min(t + window, t1));
        t += window;
      }
      break;
    }
    case SegmentPolicy::input_change: {
      std::vector<double> cuts{t0, t1};
      for (double c : schedule.change_times())
        if (c > t0 && c < t1) cuts.push_back(c);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        out.intervals.emplace_back(cuts[k], cuts[k + 1]);
      break;
    }
  }
  return out;
}

/// Disjoint, exhaustive partition of the state indices.
struct ClusterSet {
  std::vector<std::vector<int>> clusters;  ///< members sorted ascending
  double linkage_threshold = 0.0;

  int order() const { return static_cast<int>(clusters.size()); }
  int states() const {
    int n = 0;
    for (const auto& c : clusters) n += static_cast<int>(c.size());
    return n;
  }
};

/// Average-linkage clustering of the snapshot rows (one state trajectory
/// per row of the N_x x N_m snapshot matrix).
inline ClusterSet cluster_trajectories(const MatrixXd& snapshots, double threshold) {
  if (snapshots.cols() < 1)
    throw std::invalid_argument("cluster_trajectories: need at least one snapshot");
  if (!(threshold > 0.0))
    throw std::invalid_argument("cluster_trajectories: threshold must be positive");
  const std::size_t n = static_cast<std::size_t>(snapshots.rows());
  const Dendrogram dg = average_linkage_dendrogram(snapshots);
  const std::vector<int> label = cut_dendrogram(dg, n, threshold);
  ClusterSet cs;
  cs.linkage_threshold = threshold;
  const int r = 1 + *std::max_element(label.begin(), label.end());
  cs.clusters.resize(r);
  for (std::size_t i = 0; i < n; ++i)
    cs.clusters[label[i]].push_back(static_cast<int>(i));
  return cs;
}

/// Cluster-indicator aggregation matrix with unit-norm columns:
/// U(i,j) = 1/sqrt(|C_j|) when state i belongs to cluster j, else 0, so
/// U^T U = I and U U^T x averages x over each cluster.  Stored sparsely
/// (one entry per row).
class ProjectionMap {
 public:
  explicit ProjectionMap(const ClusterSet& cs) {
    const int n = cs.states();
    const int r = cs.order();
    cluster_of_.assign(n, -1);
    weight_.resize(r);
    members_ = cs.clusters;
    for (int j = 0; j < r; ++j) {
      if (cs.clusters[j].empty())
        throw std::invalid_argument("ProjectionMap: empty cluster");
      weight_[j] = 1.0 / std::sqrt(static_cast<double>(cs.clusters[j].size()));
      for (int i : cs.clusters[j]) {
        if (i < 0 || i >= n || cluster_of_[i] != -1)
          throw std::invalid_argument("ProjectionMap: clusters do not partition the states");
        cluster_of_[i] = j;
      }
    }
  }

  int rows() const { return static_cast<int>(cluster_of_.size()); }
  int cols() const { return static_cast<int>(weight_.size()); }
  int cluster_of(int state) const { return cluster_of_[state]; }
  double weight(int cluster) const { return weight_[cluster]; }
  const std::vector<std::vector<int>>& members() const { return members_; }

  /// xi = U^T x
  VectorXd project(const VectorXd& x) const {
    if (x.size() != rows()) throw std::invalid_argument("project: dimension mismatch");
    VectorXd xi = VectorXd::Zero(cols());
    for (int i = 0; i < rows(); ++i) xi[cluster_of_[i]] += weight_[cluster_of_[i]] * x[i];
    return xi;
  }

  /// x~ = U xi
  VectorXd lift(const VectorXd& xi) const {
    if (xi.size() != cols()) throw std::invalid_argument("lift: dimension mismatch");
    VectorXd x(rows());
    for (int i = 0; i < rows(); ++i) x[i] = weight_[cluster_of_[i]] * xi[cluster_of_[i]];
    return x;
  }

  /// Dense U, for tests and small problems.
  MatrixXd dense() const {
    MatrixXd u = MatrixXd::Zero(rows(), cols());
    for (int i = 0; i < rows(); ++i) u(i, cluster_of_[i]) = weight_[cluster_of_[i]];
    return u;
  }

  /// T = U S for a dense block S (r x m) -> (n x m).
  MatrixXd lift_block(const MatrixXd& s) const {
    MatrixXd t(rows(), s.cols());
    for (int i = 0; i < rows(); ++i)
      t.row(i) = weight_[cluster_of_[i]] * s.row(cluster_of_[i]);
    return t;
  }

  /// T = U^T S for a dense block S (n x m) -> (r x m).
  MatrixXd project_block(const MatrixXd& s) const {
    MatrixXd t = MatrixXd::Zero(cols(), s.cols());
    for (int i = 0; i < rows(); ++i)
      t.row(cluster_of_[i]) += weight_[cluster_of_[i]] * s.row(i);
    return t;
  }

  /// Diagonal of U^T diag(d) U (the mean of d over each cluster).
  VectorXd project_diag(const VectorXd& d) const {
    if (d.size() != rows())
      throw std::invalid_argument("project_diag: dimension mismatch");
    VectorXd out = VectorXd::Zero(cols());
    for (int i = 0; i < rows(); ++i) {
      const int j = cluster_of_[i];
      out[j] += weight_[j] * weight_[j] * d[i];
    }
    return out;
  }

 private:
  std::vector<int> cluster_of_;
  std::vector<double> weight_;
  std::vector<std::vector<int>> members_;
};

inline ProjectionMap build_projection(const ClusterSet& cs) {
  return ProjectionMap(cs);
}

/// Reduced tendency f_r(xi) = U^T f(U xi, u): lift, evaluate, project.
inline VectorXd reduced_rhs(const FieldModel& model, const ProjectionMap& u_map,
                            const VectorXd& xi, const VectorXd& u) {
  return u_map.project(model.rhs(u_map.lift(xi), u));
}

/// Reduced discrete step xi+ = U^T F_d(U xi, u) where F_d is the full
/// (substepped) step map; exact for identity projections.
inline VectorXd reduced_step(const FieldModel& model, const ProjectionMap& u_map,
                             const VectorXd& xi, const VectorXd& u, double t,
                             double dt, int substeps) {
  return u_map.project(model.step(u_map.lift(xi), u, t, dt, substeps));
}

/// Region handoff: advance one step in region m's coordinates, lift to
/// the full space, then re-project onto the next region's basis.
inline VectorXd handoff(const FieldModel& model, const ProjectionMap& u_m,
                        const ProjectionMap& u_next, const VectorXd& xi_m,
                        const VectorXd& u, double t, double dt, int substeps) {
  const VectorXd xi_adv = reduced_step(model, u_m, xi_m, u, t, dt, substeps);
  return u_next.project(u_m.lift(xi_adv));
}

}  // namespace agrohydro
