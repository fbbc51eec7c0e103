#include "debulk/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace debulk {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr const char* kCloudMagic = "debulk-cloud 1";
constexpr const char* kHeightmapMagic = "debulk-heightmap 1";

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw Error("cannot open '" + path + "' for reading");
  return is;
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << std::setprecision(17);
  return os;
}

bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("truncated binary data");
  return v;
}

std::string expect_line(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line)) throw Error("header: missing '" + key + "'");
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  if (k != key) throw Error("header: expected '" + key + "', got '" + k + "'");
  std::string rest;
  std::getline(ls, rest);
  return rest;
}

OrganizedPointCloud read_cloud_csv(std::istream& is) {
  struct Row {
    long r, c;
    Vec3 p;
    int v;
  };
  std::vector<Row> rows;
  std::string line;
  long max_r = -1, max_c = -1;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Row row{};
    if (!(ls >> row.r >> row.c >> row.p.x() >> row.p.y() >> row.p.z() >> row.v)) {
      throw Error("cloud csv: malformed line " + std::to_string(lineno));
    }
    if (row.r < 0 || row.c < 0) throw Error("cloud csv: negative index on line " + std::to_string(lineno));
    max_r = std::max(max_r, row.r);
    max_c = std::max(max_c, row.c);
    rows.push_back(row);
  }
  if (rows.empty()) throw Error("cloud csv: no points");
  OrganizedPointCloud cloud(static_cast<std::size_t>(max_c + 1), static_cast<std::size_t>(max_r + 1));
  for (const auto& row : rows) {
    const std::size_t k = cloud.index(static_cast<std::size_t>(row.c), static_cast<std::size_t>(row.r));
    cloud.points[k] = row.p;
    cloud.valid[k] = row.v != 0 && row.p.allFinite();
  }
  return cloud;
}

}  // namespace

CloudFormat parse_cloud_format(const std::string& s) {
  if (s == "ascii") return CloudFormat::ascii;
  if (s == "binary") return CloudFormat::binary;
  if (s == "csv") return CloudFormat::csv;
  throw Error("unknown cloud format '" + s + "'");
}

OrganizedPointCloud read_cloud(const std::string& path) {
  if (ends_with_ci(path, ".csv")) {
    auto is = open_in(path, false);
    OrganizedPointCloud c = read_cloud_csv(is);
    c.check();
    return c;
  }
  auto is = open_in(path, true);
  std::string magic;
  std::getline(is, magic);
  if (magic != kCloudMagic) throw Error("'" + path + "' is not a point cloud grid file");
  std::size_t width = 0, height = 0;
  std::istringstream(expect_line(is, "width")) >> width;
  std::istringstream(expect_line(is, "height")) >> height;
  RigidTransform frame;
  {
    std::istringstream fs(expect_line(is, "frame"));
    for (auto& v : frame.m) {
      if (!(fs >> v)) throw Error("header: frame needs 12 numbers");
    }
  }
  std::string enc;
  std::istringstream(expect_line(is, "encoding")) >> enc;
  expect_line(is, "data");
  if (width == 0 || height == 0) throw Error("cloud: empty grid");
  OrganizedPointCloud cloud(width, height);
  if (enc == "ascii") {
    for (std::size_t k = 0; k < cloud.points.size(); ++k) {
      int v = 0;
      if (!(is >> cloud.points[k].x() >> cloud.points[k].y() >> cloud.points[k].z() >> v)) {
        throw Error("cloud: truncated ascii data");
      }
      cloud.valid[k] = v != 0;
    }
  } else if (enc == "binary") {
    for (std::size_t k = 0; k < cloud.points.size(); ++k) {
      cloud.points[k].x() = get<double>(is);
      cloud.points[k].y() = get<double>(is);
      cloud.points[k].z() = get<double>(is);
      cloud.valid[k] = get<std::uint8_t>(is);
    }
  } else {
    throw Error("cloud: unknown encoding '" + enc + "'");
  }
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    if (!cloud.points[k].allFinite()) cloud.valid[k] = 0;
  }
  cloud.transform(frame);
  cloud.check();
  return cloud;
}

void write_cloud(const std::string& path, const OrganizedPointCloud& cloud, CloudFormat format,
                 const RigidTransform& frame) {
  cloud.check();
  if (format == CloudFormat::csv) {
    if (!frame.is_identity()) throw Error("cloud csv: no frame transform can be stored");
    auto os = open_out(path, false);
    os << "row,col,x,y,z,valid\n";
    for (std::size_t r = 0; r < cloud.height; ++r) {
      for (std::size_t c = 0; c < cloud.width; ++c) {
        const std::size_t k = cloud.index(c, r);
        const Vec3& p = cloud.points[k];
        os << r << ',' << c << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << int(cloud.valid[k]) << '\n';
      }
    }
    if (!os) throw Error("write failed for '" + path + "'");
    return;
  }
  const bool bin = format == CloudFormat::binary;
  auto os = open_out(path, true);
  os << kCloudMagic << "\nwidth " << cloud.width << "\nheight " << cloud.height << "\nframe";
  for (const double v : frame.m) os << ' ' << v;
  os << "\nencoding " << (bin ? "binary" : "ascii") << "\ndata\n";
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    const Vec3& p = cloud.points[k];
    if (bin) {
      put(os, p.x());
      put(os, p.y());
      put(os, p.z());
      put(os, cloud.valid[k]);
    } else {
      os << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << int(cloud.valid[k]) << '\n';
    }
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

void write_heightmap(std::ostream& os, const HeightMap& hm) {
  os << kHeightmapMagic << '\n';
  put(os, hm.origin.x());
  put(os, hm.origin.y());
  put(os, hm.spacing.x());
  put(os, hm.spacing.y());
  put(os, static_cast<std::uint64_t>(hm.cols()));
  put(os, static_cast<std::uint64_t>(hm.rows()));
  os.write(reinterpret_cast<const char*>(hm.values.data().data()),
           static_cast<std::streamsize>(hm.values.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(hm.valid.data().data()), static_cast<std::streamsize>(hm.valid.size()));
}

HeightMap read_heightmap(std::istream& is) {
  std::string magic;
  std::getline(is, magic);
  if (magic != kHeightmapMagic) throw Error("not a heightmap grid file");
  Vec2 origin, spacing;
  origin.x() = get<double>(is);
  origin.y() = get<double>(is);
  spacing.x() = get<double>(is);
  spacing.y() = get<double>(is);
  const auto cols = get<std::uint64_t>(is), rows = get<std::uint64_t>(is);
  if (cols > (1u << 24) || rows > (1u << 24)) throw Error("heightmap: implausible dimensions");
  HeightMap hm(origin, spacing, cols, rows);
  is.read(reinterpret_cast<char*>(hm.values.data().data()), static_cast<std::streamsize>(hm.values.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(hm.valid.data().data()), static_cast<std::streamsize>(hm.valid.size()));
  if (!is) throw Error("heightmap: truncated data");
  hm.check();
  return hm;
}

void write_heightmap(const std::string& path, const HeightMap& hm) {
  auto os = open_out(path, true);
  write_heightmap(os, hm);
  if (!os) throw Error("write failed for '" + path + "'");
}

HeightMap read_heightmap(const std::string& path) {
  auto is = open_in(path, true);
  return read_heightmap(is);
}

void write_reference(const std::string& path, const ReferenceSurface& ref) { write_heightmap(path, ref.as_heightmap()); }

ReferenceSurface read_reference(const std::string& path) { return ReferenceSurface::from_heightmap(read_heightmap(path)); }

Json read_json(const std::string& path) {
  auto is = open_in(path, false);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) {
  auto os = open_out(path, false);
  os << j.dump(2) << '\n';
  if (!os) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------- JSON mappings

namespace {

void expect_keys(const Json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw Error(std::string(what) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      throw Error(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void take(const Json& j, const char* key, T& v) {
  if (const auto it = j.find(key); it != j.end()) {
    try {
      it->get_to(v);
    } catch (const Json::exception& e) {
      throw Error(std::string("key '") + key + "': " + e.what());
    }
  }
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double as_number(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

Json mask_json(const Mask& m) {
  std::string bits(m.size(), '0');
  for (std::size_t k = 0; k < m.size(); ++k) bits[k] = m.data()[k] ? '1' : '0';
  return {{"cols", m.cols()}, {"rows", m.rows()}, {"bits", bits}};
}

Mask json_mask(const Json& j) {
  Mask m(j.at("cols").get<std::size_t>(), j.at("rows").get<std::size_t>(), 0);
  const auto bits = j.at("bits").get<std::string>();
  if (bits.size() != m.size()) throw Error("mask: bit string length does not match dims");
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = bits[k] == '1';
  return m;
}

NodeClass parse_node_class(const std::string& s) {
  for (const auto c : {NodeClass::interior, NodeClass::fixed_boundary, NodeClass::free_boundary}) {
    if (s == to_string(c)) return c;
  }
  throw Error("unknown node class '" + s + "'");
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v[k]));
  return a;
}

Eigen::VectorXd json_vector(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = as_number(j[k]);
  return v;
}

}  // namespace

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec2 json_vec2(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("expected a [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json polygon_json(const Polygon& p) {
  Json a = Json::array();
  for (const auto& v : p) a.push_back(vec2_json(v));
  return a;
}

Polygon json_polygon(const Json& j) {
  Polygon p;
  for (const auto& v : j) p.push_back(json_vec2(v));
  return p;
}

void to_json(Json& j, const MaterialParams& m) {
  j = {{"t", m.t}, {"E", m.E}, {"G", m.G}, {"rho", m.rho}, {"mu", m.mu}, {"beta", m.beta}, {"P", m.P}, {"g", m.g}};
}

void from_json(const Json& j, MaterialParams& m) {
  expect_keys(j, {"t", "E", "G", "rho", "mu", "beta", "P", "g"}, "material");
  take(j, "t", m.t);
  take(j, "E", m.E);
  take(j, "G", m.G);
  take(j, "rho", m.rho);
  take(j, "mu", m.mu);
  take(j, "beta", m.beta);
  take(j, "P", m.P);
  take(j, "g", m.g);
}

void to_json(Json& j, const SolverConfig& c) {
  j = {{"max_iterations", c.max_iterations}, {"max_outer_iterations", c.max_outer_iterations},
       {"constraint_tol", c.constraint_tol},  {"stationarity_tol", c.stationarity_tol},
       {"initial_penalty", c.initial_penalty}, {"penalty_growth", c.penalty_growth},
       {"max_penalty", c.max_penalty},        {"lbfgs_memory", c.lbfgs_memory},
       {"load_steps", c.load_steps}};
}

void from_json(const Json& j, SolverConfig& c) {
  expect_keys(j,
              {"max_iterations", "max_outer_iterations", "constraint_tol", "stationarity_tol", "initial_penalty",
               "penalty_growth", "max_penalty", "lbfgs_memory", "load_steps"},
              "solver");
  take(j, "max_iterations", c.max_iterations);
  take(j, "max_outer_iterations", c.max_outer_iterations);
  take(j, "constraint_tol", c.constraint_tol);
  take(j, "stationarity_tol", c.stationarity_tol);
  take(j, "initial_penalty", c.initial_penalty);
  take(j, "penalty_growth", c.penalty_growth);
  take(j, "max_penalty", c.max_penalty);
  take(j, "lbfgs_memory", c.lbfgs_memory);
  take(j, "load_steps", c.load_steps);
}

void to_json(Json& j, const SegmentationSettings& s) {
  j = {{"cut_height", s.cut_height}, {"area_tol", s.area_tol}, {"peak_tol", s.peak_tol},
       {"contact_height", s.contact_height}};
}

void from_json(const Json& j, SegmentationSettings& s) {
  expect_keys(j, {"cut_height", "area_tol", "peak_tol", "contact_height"}, "segmentation");
  take(j, "cut_height", s.cut_height);
  take(j, "area_tol", s.area_tol);
  take(j, "peak_tol", s.peak_tol);
  take(j, "contact_height", s.contact_height);
}

void to_json(Json& j, const PatchMargin& m) {
  j = {{"fixed_mm", m.fixed_mm}, {"node_factor", m.node_factor}, {"target_nodes", m.target_nodes}};
}

void from_json(const Json& j, PatchMargin& m) {
  expect_keys(j, {"fixed_mm", "node_factor", "target_nodes"}, "margin");
  take(j, "fixed_mm", m.fixed_mm);
  take(j, "node_factor", m.node_factor);
  take(j, "target_nodes", m.target_nodes);
}

void to_json(Json& j, const MeshConfig& c) {
  j = {{"target_node_count", c.target_node_count}, {"fiber_angles", c.fiber_angles},
       {"ply_boundary_tol", c.ply_boundary_tol},   {"mold_contact_tol", c.mold_contact_tol},
       {"ply_thickness", c.ply_thickness},         {"construction_tol", c.construction_tol},
       {"seed_at_peak", c.seed_at_peak}};
}

void from_json(const Json& j, MeshConfig& c) {
  expect_keys(j,
              {"target_node_count", "fiber_angles", "ply_boundary_tol", "mold_contact_tol", "ply_thickness",
               "construction_tol", "seed_at_peak"},
              "mesh");
  take(j, "target_node_count", c.target_node_count);
  take(j, "fiber_angles", c.fiber_angles);
  take(j, "ply_boundary_tol", c.ply_boundary_tol);
  take(j, "mold_contact_tol", c.mold_contact_tol);
  take(j, "ply_thickness", c.ply_thickness);
  take(j, "construction_tol", c.construction_tol);
  take(j, "seed_at_peak", c.seed_at_peak);
}

void to_json(Json& j, const PocketSpec& p) {
  j = {{"center", vec2_json(p.center)}, {"radii", vec2_json(p.radii)}, {"peak", p.peak}, {"profile", to_string(p.profile)}};
}

void from_json(const Json& j, PocketSpec& p) {
  expect_keys(j, {"center", "radii", "peak", "profile"}, "pocket");
  if (j.contains("center")) p.center = json_vec2(j.at("center"));
  if (j.contains("radii")) p.radii = json_vec2(j.at("radii"));
  take(j, "peak", p.peak);
  if (j.contains("profile")) p.profile = parse_bump_profile(j.at("profile").get<std::string>());
}

void to_json(Json& j, const SceneSpec& s) {
  j = {{"mold", to_string(s.mold)},
       {"cylinder_radius", s.cylinder_radius},
       {"curvature_radii", vec2_json(s.curvature_radii)},
       {"pockets", s.pockets},
       {"noise_sigma", s.noise_sigma},
       {"outlier_fraction", s.outlier_fraction},
       {"outlier_magnitude", s.outlier_magnitude},
       {"cols", s.cols},
       {"rows", s.rows},
       {"pitch", s.pitch},
       {"origin", vec2_json(s.origin)},
       {"reference_spacing", s.reference_spacing},
       {"ply_outline", polygon_json(s.ply_outline)},
       {"cut_height", s.cut_height}};
}

void from_json(const Json& j, SceneSpec& s) {
  expect_keys(j,
              {"mold", "cylinder_radius", "curvature_radii", "pockets", "noise_sigma", "outlier_fraction",
               "outlier_magnitude", "cols", "rows", "pitch", "origin", "reference_spacing", "ply_outline", "cut_height"},
              "scene");
  if (j.contains("mold")) s.mold = parse_mold_kind(j.at("mold").get<std::string>());
  take(j, "cylinder_radius", s.cylinder_radius);
  if (j.contains("curvature_radii")) s.curvature_radii = json_vec2(j.at("curvature_radii"));
  if (j.contains("pockets")) {
    s.pockets.clear();
    for (const auto& p : j.at("pockets")) {
      PocketSpec ps;
      from_json(p, ps);
      s.pockets.push_back(ps);
    }
  }
  take(j, "noise_sigma", s.noise_sigma);
  take(j, "outlier_fraction", s.outlier_fraction);
  take(j, "outlier_magnitude", s.outlier_magnitude);
  take(j, "cols", s.cols);
  take(j, "rows", s.rows);
  take(j, "pitch", s.pitch);
  if (j.contains("origin")) s.origin = json_vec2(j.at("origin"));
  take(j, "reference_spacing", s.reference_spacing);
  if (j.contains("ply_outline")) s.ply_outline = json_polygon(j.at("ply_outline"));
  take(j, "cut_height", s.cut_height);
}

void to_json(Json& j, const HeightMap& hm) {
  Json values = Json::array();
  for (const double v : hm.values.data()) values.push_back(number(v));
  j = {{"origin", vec2_json(hm.origin)}, {"spacing", vec2_json(hm.spacing)}, {"cols", hm.cols()},
       {"rows", hm.rows()},              {"values", values},                  {"valid", mask_json(hm.valid)}};
}

void from_json(const Json& j, HeightMap& hm) {
  hm = HeightMap(json_vec2(j.at("origin")), json_vec2(j.at("spacing")), j.at("cols").get<std::size_t>(),
                 j.at("rows").get<std::size_t>());
  const auto& values = j.at("values");
  if (values.size() != hm.values.size()) throw Error("heightmap: value count does not match dims");
  for (std::size_t k = 0; k < values.size(); ++k) hm.values.data()[k] = as_number(values[k]);
  hm.valid = json_mask(j.at("valid"));
  hm.check();
}

void to_json(Json& j, const ReferenceSurface& r) { j = r.as_heightmap(); }

void from_json(const Json& j, ReferenceSurface& r) { r = ReferenceSurface::from_heightmap(j.get<HeightMap>()); }

void to_json(Json& j, const AirPocketPatch& p) {
  Json cells = Json::array();
  for (const auto& c : p.cells) cells.push_back({c.col, c.row});
  Json edge = Json::array();
  for (const auto& v : p.footprint_edge) edge.push_back(vec2_json(v));
  j = {{"id", p.id},
       {"area_cm2", p.area_cm2},
       {"peak_mm", p.peak_mm},
       {"margin_mm", p.margin_mm},
       {"near_ply_boundary", p.near_ply_boundary},
       {"margin_clipped", p.margin_clipped},
       {"low_confidence", p.low_confidence},
       {"invalid_cells", p.invalid_cells},
       {"boundary", polygon_json(p.boundary)},
       {"ply_outline", polygon_json(p.ply_outline)},
       {"cells", cells},
       {"ply_surface", p.ply_surface},
       {"pocket_mask", mask_json(p.pocket_mask)},
       {"ref_surface", p.ref_surface},
       {"footprint_mask", mask_json(p.footprint_mask)},
       {"footprint_edge", edge}};
}

void from_json(const Json& j, AirPocketPatch& p) {
  p = AirPocketPatch{};
  p.id = j.at("id").get<int>();
  p.area_cm2 = j.at("area_cm2").get<double>();
  p.peak_mm = j.at("peak_mm").get<double>();
  p.margin_mm = j.at("margin_mm").get<double>();
  p.near_ply_boundary = j.at("near_ply_boundary").get<bool>();
  p.margin_clipped = j.at("margin_clipped").get<bool>();
  p.low_confidence = j.at("low_confidence").get<bool>();
  p.invalid_cells = j.value("invalid_cells", std::size_t{0});
  p.boundary = json_polygon(j.at("boundary"));
  p.ply_outline = json_polygon(j.at("ply_outline"));
  for (const auto& c : j.at("cells")) p.cells.push_back({c.at(0).get<long>(), c.at(1).get<long>()});
  p.ply_surface = j.at("ply_surface").get<HeightMap>();
  p.pocket_mask = json_mask(j.at("pocket_mask"));
  p.ref_surface = j.at("ref_surface").get<ReferenceSurface>();
  p.footprint_mask = json_mask(j.at("footprint_mask"));
  for (const auto& v : j.at("footprint_edge")) p.footprint_edge.push_back(json_vec2(v));
  if (p.pocket_mask.cols() != p.ply_surface.cols() || p.footprint_mask.cols() != p.ply_surface.cols() ||
      p.pocket_mask.rows() != p.ply_surface.rows() || p.footprint_mask.rows() != p.ply_surface.rows()) {
    throw Error("patch: mask dims do not match the surface grid");
  }
  p.rebuild_surface();
}

void to_json(Json& j, const PlyNet& net) {
  Json nodes = Json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& p = net.nodes[i];
    Json n = {{"id", i}, {"x", p.x()}, {"y", p.y()}, {"z", p.z()}, {"class", to_string(net.node_class[i])},
              {"neighbors", net.neighbors[i]}};
    if (i < net.lattice.size()) n["lattice"] = net.lattice[i];
    nodes.push_back(std::move(n));
  }
  Json edges = Json::array();
  for (const auto& [a, b] : net.edges) edges.push_back({a, b});
  j = {{"spacing_mm", net.spacing},
       {"patch_area_m2", net.patch_area_m2},
       {"fiber_angles", net.fiber_angles},
       {"chord_approximation", net.chord_approximation},
       {"frontier_count", net.frontier_count},
       {"nodes", nodes},
       {"edges", edges}};
}

void from_json(const Json& j, PlyNet& net) {
  net = PlyNet{};
  net.spacing = j.at("spacing_mm").get<double>();
  net.patch_area_m2 = j.at("patch_area_m2").get<double>();
  net.fiber_angles = j.at("fiber_angles").get<std::array<double, 2>>();
  net.chord_approximation = j.value("chord_approximation", true);
  net.frontier_count = j.value("frontier_count", 0);
  const auto& nodes = j.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.at("id").get<std::size_t>() != i) throw Error("net: node ids must be 0..N-1 in order");
    net.nodes.emplace_back(n.at("x").get<double>(), n.at("y").get<double>(), n.at("z").get<double>());
    net.node_class.push_back(parse_node_class(n.at("class").get<std::string>()));
    net.neighbors.push_back(n.at("neighbors").get<std::array<int, 4>>());
    if (n.contains("lattice")) net.lattice.push_back(n.at("lattice").get<std::array<int, 2>>());
  }
  if (!net.lattice.empty() && net.lattice.size() != net.nodes.size()) throw Error("net: partial lattice table");
  for (const auto& e : j.at("edges")) net.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  net.check_topology();
}

void to_json(Json& j, const SolveResult& r) {
  j = {{"X_final_m", vector_json(r.X_final)},
       {"X_initial_m", vector_json(r.X_initial)},
       {"pi_final_J", r.pi_final},
       {"pi_initial_J", r.pi_initial},
       {"iterations", r.iterations},
       {"outer_iterations", r.outer_iterations},
       {"function_evaluations", r.function_evaluations},
       {"max_equality_residual_m", r.max_equality_residual},
       {"max_penetration_m", r.max_penetration},
       {"stationarity", r.stationarity},
       {"converged", r.converged},
       {"wall_time_s", r.wall_time_s},
       {"warnings", r.warnings}};
}

void from_json(const Json& j, SolveResult& r) {
  r = SolveResult{};
  r.X_final = json_vector(j.at("X_final_m"));
  r.X_initial = json_vector(j.at("X_initial_m"));
  r.pi_final = j.at("pi_final_J").get<double>();
  r.pi_initial = j.at("pi_initial_J").get<double>();
  r.iterations = j.at("iterations").get<int>();
  r.outer_iterations = j.at("outer_iterations").get<int>();
  r.function_evaluations = j.at("function_evaluations").get<int>();
  r.max_equality_residual = j.at("max_equality_residual_m").get<double>();
  r.max_penetration = j.at("max_penetration_m").get<double>();
  r.stationarity = j.at("stationarity").get<double>();
  r.converged = j.at("converged").get<bool>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void to_json(Json& j, const DebulkReport& r) {
  j = {{"pocket_id", r.pocket_id},
       {"rms_mm", r.rms_mm},
       {"verdict", to_string(r.verdict)},
       {"threshold_mm", r.threshold_mm},
       {"predicted_max_mm", r.predicted_max_mm},
       {"raw_max_mm", r.raw_max_mm},
       {"sample_count", r.sample_count},
       {"area_cm2", r.area_cm2},
       {"peak_mm", r.peak_mm},
       {"spacing_mm", r.spacing_mm},
       {"node_count", r.node_count},
       {"ridge_count", r.ridge_count},
       {"converged", r.converged},
       {"iterations", r.iterations},
       {"function_evaluations", r.function_evaluations},
       {"solve_time_s", r.solve_time_s},
       {"total_time_s", r.total_time_s},
       {"max_equality_residual_m", r.max_equality_residual},
       {"max_penetration_m", r.max_penetration},
       {"diagnostics", r.diagnostics}};
}

void from_json(const Json& j, DebulkReport& r) {
  r = DebulkReport{};
  r.pocket_id = j.at("pocket_id").get<int>();
  r.rms_mm = j.at("rms_mm").get<double>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  r.threshold_mm = j.at("threshold_mm").get<double>();
  r.predicted_max_mm = j.at("predicted_max_mm").get<double>();
  r.raw_max_mm = j.at("raw_max_mm").get<double>();
  r.sample_count = j.at("sample_count").get<std::size_t>();
  r.area_cm2 = j.value("area_cm2", 0.0);
  r.peak_mm = j.value("peak_mm", 0.0);
  r.spacing_mm = j.value("spacing_mm", 0.0);
  r.node_count = j.value("node_count", 0);
  r.ridge_count = j.value("ridge_count", 0);
  r.converged = j.value("converged", false);
  r.iterations = j.value("iterations", 0);
  r.function_evaluations = j.value("function_evaluations", 0);
  r.solve_time_s = j.value("solve_time_s", 0.0);
  r.total_time_s = j.value("total_time_s", 0.0);
  r.max_equality_residual = j.value("max_equality_residual_m", 0.0);
  r.max_penetration = j.value("max_penetration_m", 0.0);
  r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << std::setprecision(10) << "outer,objective,eq_residual,penetration,stationarity\n";
  for (const auto& r : rows) {
    os << r.outer << ',' << r.objective << ',' << r.eq_residual << ',' << r.penetration << ',' << r.stationarity << '\n';
  }
}

void write_wrinkle_csv(std::ostream& os, const Wrinkle2DResult& result) {
  os << std::setprecision(10) << "step,pressure_pa,node,x_mm,z_mm\n";
  for (const auto& s : result.steps) {
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      os << s.step << ',' << s.pressure << ',' << i << ',' << s.nodes[i].x() << ',' << s.nodes[i].y() << '\n';
    }
  }
}

}  // namespace debulk
