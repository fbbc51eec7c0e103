#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "debulk/geometry.hpp"
#include "debulk/segmentation.hpp"

namespace debulk {

enum class NodeClass : std::uint8_t { interior = 0, fixed_boundary = 1, free_boundary = 2 };

const char* to_string(NodeClass c);

struct MeshConfig {
  int target_node_count = 100;
  std::array<double, 2> fiber_angles{0.0, 90.0};  // degrees, in the XY plane at the centre
  double ply_boundary_tol = 20.0;                 // mm
  double mold_contact_tol = 1.0;                  // mm
  double ply_thickness = 0.3;                     // mm; lower clamp for the spacing is 2t
  double construction_tol = 1e-6;                 // relative chord tolerance
  bool seed_at_peak = false;                      // seed at the highest pocket cell, not the centroid

  void check() const;
};

/// Slots in PlyNet::neighbors.
enum NeighborSlot : int { kFiber1Next = 0, kFiber1Prev = 1, kFiber2Next = 2, kFiber2Prev = 3 };

/// Pin-jointed net. Node lattice index (a, b): a counts steps along fiber 1, b along fiber 2,
/// so fiber-1 path id is b and fiber-2 path id is a.
struct PlyNet {
  std::vector<Vec3> nodes;                      // mm
  std::vector<std::array<int, 4>> neighbors;    // NeighborSlot order, -1 when absent
  std::vector<NodeClass> node_class;
  std::vector<std::array<int, 2>> lattice;
  std::vector<std::pair<int, int>> edges;       // unique (C1, C2), C1 < C2
  double spacing = 0.0;                         // mm
  double patch_area_m2 = 0.0;
  std::array<double, 2> fiber_angles{0.0, 90.0};
  bool chord_approximation = true;              // spacing is a 3D chord, not arc length
  int frontier_count = 0;                       // nodes the construction could not place

  std::size_t size() const { return nodes.size(); }
  std::size_t count(NodeClass c) const;

  /// Rebuilds `edges` from `neighbors`.
  void rebuild_edges();
  /// Symmetry, duplicate-free edges, valid ids. Throws on violation.
  void check_topology() const;
  /// Largest |chord - spacing| over all edges, mm.
  double max_chord_error() const;
};

/// Two fiber paths through the patch centre, nodes at chord spacing.
struct FiberPaths {
  Vec3 center;
  /// paths[f] holds points ordered from the far backward end to the far forward end.
  std::array<std::vector<Vec3>, 2> paths;
  std::array<int, 2> center_index{0, 0};
};

/// Node spacing from the pocket area: sqrt(area / target_n), clamped to [2t, extent / 3].
double choose_discretization(const AirPocketPatch& patch, int target_n, double ply_thickness);

Vec3 patch_center(const AirPocketPatch& patch, bool at_peak = false);

/// Geodesic march in both senses of each fiber direction until the paths leave the
/// offset boundary by one spacing.
FiberPaths seed_fiber_paths(const AirPocketPatch& patch, const std::array<double, 2>& fiber_angles,
                            double spacing, bool at_peak = false);

/// Quadrant-by-quadrant pin-jointed net construction from the seed paths.
PlyNet place_nodes(const AirPocketPatch& patch, const FiberPaths& paths, double spacing,
                   double construction_tol = 1e-6);

/// Trims to the offset boundary and assigns fixed/free boundary classes.
PlyNet classify_boundary(const PlyNet& net, const AirPocketPatch& patch, const MeshConfig& config);

/// choose_discretization + seed_fiber_paths + place_nodes + classify_boundary.
PlyNet mesh_patch(const AirPocketPatch& patch, const MeshConfig& config);

}  // namespace debulk
