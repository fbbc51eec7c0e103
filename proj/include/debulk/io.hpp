#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "debulk/energy.hpp"
#include "debulk/meshing.hpp"
#include "debulk/optimizer.hpp"
#include "debulk/postprocess.hpp"
#include "debulk/scan_prep.hpp"
#include "debulk/segmentation.hpp"
#include "debulk/synth.hpp"
#include "debulk/wrinkle2d.hpp"

namespace debulk {

using Json = nlohmann::json;

// Point clouds. Grid files carry a text header {width, height, frame, encoding} followed by
// the points, as text rows "x y z valid" or as little-endian binary records. CSV rows are
// (row, col, x, y, z, valid).
enum class CloudFormat { ascii, binary, csv };
CloudFormat parse_cloud_format(const std::string& s);

/// Reads any of the formats (CSV by extension, grid files by header) and applies the
/// header frame transform.
OrganizedPointCloud read_cloud(const std::string& path);
void write_cloud(const std::string& path, const OrganizedPointCloud& cloud, CloudFormat format,
                 const RigidTransform& frame = {});

// Heightmap grid file: text header, then origin, spacing, dims, row-major values and the
// mask in little-endian binary. Round trips bit-exactly.
void write_heightmap(const std::string& path, const HeightMap& hm);
HeightMap read_heightmap(const std::string& path);
void write_heightmap(std::ostream& os, const HeightMap& hm);
HeightMap read_heightmap(std::istream& is);

/// Reference surfaces use the heightmap file with every cell valid.
void write_reference(const std::string& path, const ReferenceSurface& ref);
ReferenceSurface read_reference(const std::string& path);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

// JSON mappings. Reading a settings object overlays the keys present onto the value
// passed in and rejects unknown keys.
void to_json(Json& j, const MaterialParams& m);
void from_json(const Json& j, MaterialParams& m);
void to_json(Json& j, const SolverConfig& c);
void from_json(const Json& j, SolverConfig& c);
void to_json(Json& j, const SegmentationSettings& s);
void from_json(const Json& j, SegmentationSettings& s);
void to_json(Json& j, const PatchMargin& m);
void from_json(const Json& j, PatchMargin& m);
void to_json(Json& j, const MeshConfig& c);
void from_json(const Json& j, MeshConfig& c);
void to_json(Json& j, const PocketSpec& p);
void from_json(const Json& j, PocketSpec& p);
void to_json(Json& j, const SceneSpec& s);
void from_json(const Json& j, SceneSpec& s);

void to_json(Json& j, const HeightMap& hm);
void from_json(const Json& j, HeightMap& hm);
void to_json(Json& j, const ReferenceSurface& r);
void from_json(const Json& j, ReferenceSurface& r);
void to_json(Json& j, const AirPocketPatch& p);
void from_json(const Json& j, AirPocketPatch& p);
void to_json(Json& j, const PlyNet& net);
void from_json(const Json& j, PlyNet& net);
void to_json(Json& j, const SolveResult& r);
void from_json(const Json& j, SolveResult& r);
/// The report record without its heightfield, which goes to a grid file.
void to_json(Json& j, const DebulkReport& r);
void from_json(const Json& j, DebulkReport& r);

Json vec2_json(const Vec2& v);
Vec2 json_vec2(const Json& j);
Json polygon_json(const Polygon& p);
Polygon json_polygon(const Json& j);

struct TraceRow {
  int outer = 0;
  double objective = 0.0;
  double eq_residual = 0.0;
  double penetration = 0.0;
  double stationarity = 0.0;
};
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows);

/// step, pressure_pa, node, x_mm, z_mm
void write_wrinkle_csv(std::ostream& os, const Wrinkle2DResult& result);

}  // namespace debulk
