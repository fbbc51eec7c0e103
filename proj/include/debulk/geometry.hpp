#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <span>
#include <vector>

namespace debulk {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Closed polygon in the XY plane; the closing edge back to the first vertex is implicit.
using Polygon = std::vector<Vec2>;

double signed_area(std::span<const Vec2> poly);
Vec2 area_centroid(std::span<const Vec2> poly);

/// Even-odd rule; points exactly on an edge may report either side.
bool point_in_polygon(std::span<const Vec2> poly, const Vec2& p);

double distance_to_segment(const Vec2& p, const Vec2& a, const Vec2& b);

/// Distance from p to the closed polyline through poly (0 on the outline).
double distance_to_outline(std::span<const Vec2> poly, const Vec2& p);

}  // namespace debulk
