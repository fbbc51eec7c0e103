#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/geometry.hpp"
#include "debulk/optimizer.hpp"

namespace debulk {

enum class EndCondition : std::uint8_t { fixed, free };
const char* to_string(EndCondition e);
EndCondition parse_end_condition(const std::string& s);

/// Mold section: flat at z = 0 or, for radius > 0, the convex arc z = sqrt(R^2 - x^2) - R.
struct MoldProfile2D {
  double radius = 0.0;  // mm, 0 for flat

  double z(double x) const;
  double slope(double x) const;
};

/// Chain of nodes (x, z) in mm over a mold section.
struct Ply2D {
  std::vector<Vec2> nodes;
  std::vector<double> rest_length;  // mm, one per segment
  EndCondition left = EndCondition::fixed;
  EndCondition right = EndCondition::fixed;
  MoldProfile2D mold;
  /// Centreline gap kept between parts of the chain further apart along it than half a
  /// turn at that diameter, mm. Negative uses the ply thickness; 0 lets the chain cross itself.
  double contact_gap = -1.0;

  std::size_t segments() const { return rest_length.size(); }
  double length() const;
  /// Throws on too few nodes, non-positive rest lengths or a node below the mold.
  void check(double tol_mm = 1e-6) const;

  /// Resamples a polyline into `segments` pieces of equal arc length.
  static Ply2D from_polyline(const std::vector<Vec2>& points, int segments, EndCondition left = EndCondition::fixed,
                             EndCondition right = EndCondition::fixed, MoldProfile2D mold = {});
  /// Two ends on a flat mold one `spacing` either side of an apex `apex` mm high.
  static Ply2D triangle(double spacing, double apex, int segments);
};

struct Wrinkle2DStep {
  int step = 0;
  double pressure = 0.0;        // Pa
  std::vector<Vec2> nodes;     // mm
  double energy = 0.0;          // J/m at the solution
  double energy_at_start = 0.0; // J/m of the step's start under the step's load
  bool converged = false;
  int iterations = 0;
  int function_evaluations = 0;
  double max_length_residual = 0.0;  // m
  double max_penetration = 0.0;      // m
  double max_overlap = 0.0;          // m, self-contact
};

struct Wrinkle2DResult {
  std::vector<Wrinkle2DStep> steps;  // steps[0] is the start
  bool converged = true;
  bool folded = false;               // some segment turned past vertical
  std::vector<std::string> warnings;

  const std::vector<Vec2>& final_nodes() const { return steps.back().nodes; }
  /// Largest height above the mold, mm.
  double apex_height(const MoldProfile2D& mold) const;
  /// Width of the part of the final chain higher than `level` above the mold, mm.
  double width_above(const MoldProfile2D& mold, double level) const;
};

double chain_length(const std::vector<Vec2>& nodes);

/// Per unit depth: bending 1/2 (E t^3/12) theta^2 at interior nodes, gravity, and the
/// segment-normal vacuum load applied in `steps` increments with directions frozen at
/// the start of each increment, under segment inextensibility, z >= mold and self-contact.
/// The default solver tolerance is tightened to 1e-10 m.
Wrinkle2DResult simulate_2d(const Ply2D& ply, const MaterialParams& mat, int steps = 5,
                            const SolverConfig* cfg = nullptr);

}  // namespace debulk
