#pragma once

// Cylindrical discretization of a circular field: cell-centered nodes in
// (r, theta, z), flat indexing, neighbor topology with azimuthal
// wrap-around, and the standard node-set queries (surface, bottom,
// sensors).
//
// Conventions:
//   * flat index = i_z * (n_r * n_theta) + i_theta * n_r + i_r
//   * radial centers at r_i = (i_r + 1/2) dr, so no node sits on the axis
//   * i_z counts layers downward from the surface (i_z = 0 shallowest);
//     the physical z axis points upward

#include <algorithm>
#include <array>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace agrohydro {

struct CylindricalGrid {
  int n_r = 0, n_theta = 0, n_z = 0;
  double radius = 0.0;  ///< field radius [m]
  double depth = 0.0;   ///< soil depth [m]
  double dr = 0.0, dtheta = 0.0, dz = 0.0;

  int size() const { return n_r * n_theta * n_z; }
  int surface_count() const { return n_r * n_theta; }

  int flat(int i_r, int i_theta, int i_z) const {
    return i_z * (n_r * n_theta) + i_theta * n_r + i_r;
  }
  std::array<int, 3> coords(int flat_index) const {
    const int per_layer = n_r * n_theta;
    const int i_z = flat_index / per_layer;
    const int rem = flat_index - i_z * per_layer;
    return {rem % n_r, rem / n_r, i_z};
  }

  double r_center(int i_r) const { return (i_r + 0.5) * dr; }
  /// Depth of a layer center below the surface [m].
  double depth_center(int i_z) const { return (i_z + 0.5) * dz; }

  double cell_volume(int flat_index) const {
    return r_center(coords(flat_index)[0]) * dr * dtheta * dz;
  }
};

inline CylindricalGrid build_grid(int n_r, int n_theta, int n_z, double radius,
                                  double depth) {
  if (n_r < 1 || n_theta < 1 || n_z < 1)
    throw std::invalid_argument("build_grid: node counts must be >= 1");
  if (n_theta == 2)
    throw std::invalid_argument("build_grid: n_theta must be 1 or >= 3");
  if (!(radius > 0.0) || !(depth > 0.0))
    throw std::invalid_argument("build_grid: radius and depth must be positive");
  CylindricalGrid g;
  g.n_r = n_r;
  g.n_theta = n_theta;
  g.n_z = n_z;
  g.radius = radius;
  g.depth = depth;
  g.dr = radius / n_r;
  g.dtheta = 2.0 * std::numbers::pi / n_theta;
  g.dz = depth / n_z;
  return g;
}

/// Neighbor indices of one node; -1 marks a boundary face.  Azimuthal
/// neighbors always exist (periodic); with n_theta == 1 they collapse to
/// the node itself.
struct NeighborInfo {
  int r_in = -1;      ///< toward the axis
  int r_out = -1;     ///< toward the field edge
  int theta_prev = -1;
  int theta_next = -1;
  int z_up = -1;      ///< toward the surface
  int z_down = -1;    ///< deeper
  bool at_inner = false, at_outer = false, at_surface = false, at_bottom = false;
};

inline NeighborInfo neighbors(const CylindricalGrid& g, int i) {
  if (i < 0 || i >= g.size())
    throw std::out_of_range("neighbors: node index " + std::to_string(i) +
                            " out of range");
  const auto [ir, it, iz] = g.coords(i);
  NeighborInfo nb;
  nb.at_inner = (ir == 0);
  nb.at_outer = (ir == g.n_r - 1);
  nb.at_surface = (iz == 0);
  nb.at_bottom = (iz == g.n_z - 1);
  if (!nb.at_inner) nb.r_in = g.flat(ir - 1, it, iz);
  if (!nb.at_outer) nb.r_out = g.flat(ir + 1, it, iz);
  nb.theta_prev = g.flat(ir, (it + g.n_theta - 1) % g.n_theta, iz);
  nb.theta_next = g.flat(ir, (it + 1) % g.n_theta, iz);
  if (!nb.at_surface) nb.z_up = g.flat(ir, it, iz - 1);
  if (!nb.at_bottom) nb.z_down = g.flat(ir, it, iz + 1);
  return nb;
}

struct NodeSet {
  enum class Role { surface, bottom, sensor };
  std::vector<int> indices;  ///< strictly increasing, all < N_x
  Role role = Role::sensor;
};

/// Sensor placement: an explicit node list, or a (depth, count) rule that
/// spreads `count` sensors evenly over the layer containing `depth`.
struct SensorSpec {
  std::vector<int> explicit_indices;
  double depth = 0.0;
  int count = 0;
  bool by_rule = false;
};

struct GridNodeSets {
  NodeSet surface, bottom, sensors;
};

inline GridNodeSets node_sets(const CylindricalGrid& g, const SensorSpec& spec) {
  GridNodeSets out;
  out.surface.role = NodeSet::Role::surface;
  out.bottom.role = NodeSet::Role::bottom;
  out.sensors.role = NodeSet::Role::sensor;
  for (int i = 0; i < g.surface_count(); ++i) out.surface.indices.push_back(i);
  const int base = (g.n_z - 1) * g.surface_count();
  for (int i = 0; i < g.surface_count(); ++i) out.bottom.indices.push_back(base + i);

  std::vector<int> sensors;
  if (spec.by_rule) {
    if (spec.count < 0) throw std::invalid_argument("node_sets: sensor count < 0");
    int iz = static_cast<int>(spec.depth / g.dz);
    iz = std::clamp(iz, 0, g.n_z - 1);
    const int per_layer = g.surface_count();
    if (spec.count > per_layer)
      throw std::invalid_argument("node_sets: more sensors than layer nodes");
    for (int j = 0; j < spec.count; ++j) {
      const int pos = static_cast<int>((j + 0.5) * per_layer / spec.count);
      sensors.push_back(iz * per_layer + pos);
    }
  } else {
    sensors = spec.explicit_indices;
  }
  std::sort(sensors.begin(), sensors.end());
  for (std::size_t k = 0; k < sensors.size(); ++k) {
    if (sensors[k] < 0 || sensors[k] >= g.size())
      throw std::out_of_range("node_sets: sensor index " +
                              std::to_string(sensors[k]) + " out of range");
    if (k > 0 && sensors[k] == sensors[k - 1])
      throw std::invalid_argument("node_sets: duplicate sensor index");
  }
  out.sensors.indices = std::move(sensors);
  return out;
}

}  // namespace agrohydro
