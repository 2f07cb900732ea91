#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "travex/geometry.hpp"
#include "travex/semantic.hpp"

namespace travex {

struct Box {
  Point3 min;
  Point3 max;
  TerrainClass cls{TerrainClass::Untraversable};

  bool contains(const Point3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
  }
};

/// Synthetic world: a column heightfield (flat-topped cells) with per-cell
/// class labels, axis-aligned solid boxes and a flat ceiling.
struct Scenario {
  std::string name;
  double resolution{0.1};
  double origin_x{0.0};
  double origin_y{0.0};
  int width{0};
  int height{0};
  std::vector<float> heights;         // row-major, row j covers y in [origin_y + j*res, ...)
  std::vector<TerrainClass> labels;   // same layout as heights
  std::vector<Box> boxes;
  double ceiling{3.0};
  RobotState ground_start;
  Point3 dock_offset{0.0, 0.0, 0.6};
  RigidTransform static_transform;    // aerial frame -> ground global frame
  std::uint64_t seed{1};
  std::string expected_decision;      // "complete" or "deploy"
  std::optional<Box> beyond_region;   // space past the obstacle, for hand-off accounting
  std::optional<Box> stairs_region;

  std::optional<std::pair<int, int>> cell_of(double x, double y) const {
    const int i = static_cast<int>(std::floor((x - origin_x) / resolution));
    const int j = static_cast<int>(std::floor((y - origin_y) / resolution));
    if (i < 0 || j < 0 || i >= width || j >= height) return std::nullopt;
    return std::make_pair(i, j);
  }
  double height_at_cell(int i, int j) const { return heights[static_cast<std::size_t>(j) * width + i]; }
  TerrainClass label_at_cell(int i, int j) const { return labels[static_cast<std::size_t>(j) * width + i]; }

  /// Terrain height including boxes that rest on it, -inf outside the map.
  double support_height(double x, double y) const {
    const auto c = cell_of(x, y);
    if (!c) return -std::numeric_limits<double>::infinity();
    double h = height_at_cell(c->first, c->second);
    for (const auto& b : boxes)
      if (x >= b.min.x && x <= b.max.x && y >= b.min.y && y <= b.max.y && b.min.z <= h + 1e-9) h = std::max(h, b.max.z);
    return h;
  }

  bool solid(const Point3& p) const {
    const auto c = cell_of(p.x, p.y);
    if (!c || p.z <= height_at_cell(c->first, c->second) || p.z >= ceiling) return true;
    return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(p); });
  }

  void validate() const {
    if (!(resolution > 0.0) || width <= 0 || height <= 0) throw std::invalid_argument("Scenario: bad grid geometry");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (heights.size() != n || labels.size() != n)
      throw std::invalid_argument("Scenario: heightmap and label grid must match the declared size");
    if (!static_transform.is_valid()) throw std::invalid_argument("Scenario: static transform is not rigid");
    const Point3 body{ground_start.x, ground_start.y, support_height(ground_start.x, ground_start.y) + 0.3};
    if (solid(body)) throw std::invalid_argument("Scenario: ground start pose is inside solid geometry");
  }
};

// ---------------------------------------------------------------------------
// Lidar

struct LidarConfig {
  int rays{360};
  int channels{48};
  double min_elevation{-0.8};
  double max_elevation{0.55};
  double max_range{8.0};
  double mount_height{0.5};  // sensor origin above the agent pose

  void validate() const {
    if (rays <= 0 || channels <= 1) throw std::invalid_argument("LidarConfig: need rays > 0 and channels > 1");
    if (!(max_elevation > min_elevation)) throw std::invalid_argument("LidarConfig: empty elevation span");
    if (!(max_range > 0.0)) throw std::invalid_argument("LidarConfig: max_range must be positive");
  }
};

struct LidarReturn {
  Point3 point;
  TerrainClass cls{TerrainClass::Untraversable};
  double slope{0.0};  // surface inclination at the hit, radians
};

struct RayResult {
  double t{std::numeric_limits<double>::infinity()};
  TerrainClass cls{TerrainClass::Untraversable};
  double slope{0.0};
};

namespace detail {

/// Entering intersection of a ray with an AABB; the slope comes from the face hit.
inline void ray_box(const Point3& o, const Point3& d, const Box& b, RayResult& best) {
  double t0 = 0.0;
  double t1 = best.t;
  int axis = -1;
  const double oo[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double lo[3] = {b.min.x, b.min.y, b.min.z};
  const double hi[3] = {b.max.x, b.max.y, b.max.z};
  for (int a = 0; a < 3; ++a) {
    if (dd[a] == 0.0) {
      if (oo[a] < lo[a] || oo[a] > hi[a]) return;
      continue;
    }
    double ta = (lo[a] - oo[a]) / dd[a];
    double tb = (hi[a] - oo[a]) / dd[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (axis < 0 || t0 >= best.t) return;  // origin inside the box, or farther than the current hit
  best.t = t0;
  best.cls = b.cls;
  best.slope = axis == 2 ? 0.0 : kPi / 2.0;
}

/// Walks the heightfield columns crossed by the ray in the xy plane.
inline void ray_heightfield(const Scenario& s, const Point3& o, const Point3& d, double max_t, RayResult& best) {
  const double res = s.resolution;
  const double gx = (o.x - s.origin_x) / res;
  const double gy = (o.y - s.origin_y) / res;
  int i = static_cast<int>(std::floor(gx));
  int j = static_cast<int>(std::floor(gy));
  const int si = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  const int sj = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dtx = si != 0 ? res / std::abs(d.x) : inf;
  const double dty = sj != 0 ? res / std::abs(d.y) : inf;
  double tx = si > 0 ? (std::floor(gx) + 1.0 - gx) * res / d.x : (si < 0 ? (gx - std::floor(gx)) * res / -d.x : inf);
  double ty = sj > 0 ? (std::floor(gy) + 1.0 - gy) * res / d.y : (sj < 0 ? (gy - std::floor(gy)) * res / -d.y : inf);
  double t_enter = 0.0;
  const double limit = std::min(max_t, best.t);
  bool first = true;
  while (t_enter <= limit) {
    const double t_exit = std::min({tx, ty, limit});
    if (i >= 0 && j >= 0 && i < s.width && j < s.height) {
      const double h = s.height_at_cell(i, j);
      const double z_in = o.z + d.z * t_enter;
      if (z_in <= h && !first) {
        best = {t_enter, s.label_at_cell(i, j), kPi / 2.0};
        return;
      }
      if (d.z < 0.0) {
        const double t_top = (h - o.z) / d.z;
        if (t_top >= t_enter && t_top <= t_exit) {
          best = {t_top, s.label_at_cell(i, j), 0.0};
          return;
        }
      }
    }
    first = false;
    if (tx == inf && ty == inf) return;
    if (tx < ty) {
      t_enter = tx;
      tx += dtx;
      i += si;
    } else {
      t_enter = ty;
      ty += dty;
      j += sj;
    }
  }
}

}  // namespace detail

/// Nearest surface along a unit ray, if any lies within max_t.
inline std::optional<RayResult> cast_ray(const Scenario& s, const Point3& o, const Point3& d, double max_t) {
  RayResult best;
  best.t = max_t;
  for (const auto& b : s.boxes) detail::ray_box(o, d, b, best);
  if (d.z > 0.0) {
    const double t = (s.ceiling - o.z) / d.z;
    if (t >= 0.0 && t < best.t) best = {t, TerrainClass::Untraversable, 0.0};
  }
  RayResult hf = best;
  detail::ray_heightfield(s, o, d, best.t, hf);
  if (hf.t < best.t) best = hf;
  if (!(best.t < max_t)) return std::nullopt;
  return best;
}

/// Deterministic scan from a sensor at `pose` lifted by the mount height.
inline std::vector<LidarReturn> simulate_lidar(const Scenario& s, const RobotState& pose, const LidarConfig& cfg) {
  std::vector<LidarReturn> out;
  const Point3 o{pose.x, pose.y, pose.z + cfg.mount_height};
  out.reserve(static_cast<std::size_t>(cfg.rays) * static_cast<std::size_t>(cfg.channels) / 2);
  for (int c = 0; c < cfg.channels; ++c) {
    const double el = cfg.min_elevation + (cfg.max_elevation - cfg.min_elevation) * c / (cfg.channels - 1);
    const double ce = std::cos(el);
    const double se = std::sin(el);
    for (int r = 0; r < cfg.rays; ++r) {
      const double az = pose.psi + 2.0 * kPi * r / cfg.rays;
      const Point3 d{ce * std::cos(az), ce * std::sin(az), se};
      const auto hit = cast_ray(s, o, d, cfg.max_range);
      if (!hit) continue;
      out.push_back({o + hit->t * d, hit->cls, hit->slope});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canned scenarios

namespace detail {

inline Scenario blank(const std::string& name, double sx, double sy, double ceiling, std::uint64_t seed) {
  Scenario s;
  s.name = name;
  s.resolution = 0.1;
  s.origin_x = -1.0;
  s.origin_y = -1.0;
  s.width = static_cast<int>(std::lround(sx / s.resolution)) + 20;
  s.height = static_cast<int>(std::lround(sy / s.resolution)) + 20;
  s.heights.assign(static_cast<std::size_t>(s.width) * s.height, 0.0f);
  s.labels.assign(s.heights.size(), TerrainClass::Optimal);
  s.ceiling = ceiling;
  s.seed = seed;
  return s;
}

inline void wall(Scenario& s, double x0, double y0, double x1, double y1) {
  s.boxes.push_back({{x0, y0, -0.5}, {x1, y1, s.ceiling + 0.5}, TerrainClass::Untraversable});
}

/// Perimeter walls of thickness 0.2 around [0,sx]x[0,sy].
inline void enclose(Scenario& s, double sx, double sy) {
  wall(s, -0.2, -0.2, sx + 0.2, 0.0);
  wall(s, -0.2, sy, sx + 0.2, sy + 0.2);
  wall(s, -0.2, 0.0, 0.0, sy);
  wall(s, sx, 0.0, sx + 0.2, sy);
}

}  // namespace detail

inline const std::vector<std::string>& canned_scenario_kinds() {
  static const std::vector<std::string> kinds{"open", "corridor", "junction", "clutter", "stairs"};
  return kinds;
}

inline Scenario make_scenario(const std::string& kind, std::uint64_t seed) {
  using detail::blank;
  using detail::enclose;
  using detail::wall;
  if (kind == "open") {
    Scenario s = blank("open", 6.0, 6.0, 2.5, seed);
    enclose(s, 6.0, 6.0);
    s.ground_start = RobotState(1.5, 3.0, 0.0, 0.0);
    s.expected_decision = "complete";
    return s;
  }
  if (kind == "corridor") {
    Scenario s = blank("corridor", 16.0, 2.4, 2.5, seed);
    enclose(s, 16.0, 2.4);
    s.ground_start = RobotState(1.0, 1.2, 0.0, 0.0);
    s.expected_decision = "complete";
    return s;
  }
  if (kind == "junction") {
    Scenario s = blank("junction", 10.0, 14.0, 2.5, seed);
    // Stem along +x at y in [6, 8.4], crossbar along y at x in [7.6, 10].
    enclose(s, 10.0, 14.0);
    wall(s, 0.0, 0.0, 7.6, 6.0);
    wall(s, 0.0, 8.4, 7.6, 14.0);
    s.ground_start = RobotState(1.0, 7.2, 0.0, 0.0);
    s.expected_decision = "complete";
    return s;
  }
  if (kind == "clutter") {
    Scenario s = blank("clutter", 14.0, 3.0, 3.0, seed);
    enclose(s, 14.0, 3.0);
    // Rubble mound across the full corridor width, rising to about 1.3 m.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.08, 0.08);
    const int rows = 15;
    for (int r = 0; r < rows; ++r) {
      const double x = 5.0 + 0.2 * r;
      const double base = 0.25 + 0.15 * std::min(r, rows - 1 - r);
      for (double y = 0.0; y < 3.0 - 1e-9; y += 0.2)
        s.boxes.push_back({{x, y, 0.0}, {x + 0.2, y + 0.2, base + jitter(rng)}, TerrainClass::Undesirable});
    }
    s.ground_start = RobotState(1.0, 1.5, 0.0, 0.0);
    s.expected_decision = "deploy";
    s.beyond_region = Box{{8.2, 0.0, 0.0}, {14.0, 3.0, 3.0}, TerrainClass::Optimal};
    return s;
  }
  if (kind == "stairs") {
    Scenario s = blank("stairs", 12.0, 4.0, 4.0, seed);
    enclose(s, 12.0, 4.0);
    // Six 0.3 m risers on 0.2 m treads from x = 5.0, then a landing.
    const double x0 = 5.0;
    const double rise = 0.3;
    const double run = 0.2;
    const int steps = 6;
    // The last riser lands on the landing itself.
    const double top = x0 + run * (steps - 1);
    for (int j = 0; j < s.height; ++j)
      for (int i = 0; i < s.width; ++i) {
        const double x = s.origin_x + (i + 0.5) * s.resolution;
        const std::size_t k = static_cast<std::size_t>(j) * s.width + i;
        if (x < x0) continue;
        const int step = std::min(steps, static_cast<int>(std::floor((x - x0) / run)) + 1);
        s.heights[k] = static_cast<float>(rise * step);
        s.labels[k] = x < top ? TerrainClass::Undesirable : TerrainClass::Optimal;
      }
    s.ground_start = RobotState(3.0, 2.0, 0.0, 0.0);
    s.expected_decision = "deploy";
    s.stairs_region = Box{{x0, 0.0, 0.0}, {top, 4.0, rise * steps}, TerrainClass::Undesirable};
    s.beyond_region = Box{{top, 0.0, rise * steps}, {12.0, 4.0, 4.0}, TerrainClass::Optimal};
    return s;
  }
  throw std::invalid_argument("unknown scenario kind: " + kind);
}

// ---------------------------------------------------------------------------
// Scenario files: JSON manifest plus HGTF heightmap and label PGM side files.

namespace detail {

inline nlohmann::json box_json(const Box& b) {
  return {{"min", {b.min.x, b.min.y, b.min.z}}, {"max", {b.max.x, b.max.y, b.max.z}}, {"class", static_cast<int>(b.cls)}};
}

inline Box box_from_json(const nlohmann::json& j) {
  Box b;
  b.min = {j.at("min").at(0).get<double>(), j.at("min").at(1).get<double>(), j.at("min").at(2).get<double>()};
  b.max = {j.at("max").at(0).get<double>(), j.at("max").at(1).get<double>(), j.at("max").at(2).get<double>()};
  b.cls = terrain_class_from_index(j.at("class").get<int>());
  if (!(b.min.x <= b.max.x && b.min.y <= b.max.y && b.min.z <= b.max.z))
    throw std::invalid_argument("box min exceeds max");
  return b;
}

inline nlohmann::json pose_json(const RobotState& p) { return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"psi", p.psi}}; }

inline RobotState pose_from_json(const nlohmann::json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(), j.at("psi").get<double>()};
}

}  // namespace detail

inline nlohmann::json transform_json(const RigidTransform& tf) {
  return {{"rotation", tf.rotation}, {"translation", {tf.translation.x, tf.translation.y, tf.translation.z}}};
}

inline RigidTransform transform_from_json(const nlohmann::json& j) {
  RigidTransform tf;
  tf.rotation = j.at("rotation").get<Matrix3>();
  const auto& t = j.at("translation");
  tf.translation = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
  return tf;
}

/// Writes `scenario.json`, `heightmap.hgt` and `labels.pgm` into `dir`.
inline void write_scenario(const std::filesystem::path& dir, const Scenario& s) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["name"] = s.name;
  j["resolution"] = s.resolution;
  j["origin"] = {s.origin_x, s.origin_y};
  j["width"] = s.width;
  j["height"] = s.height;
  j["heightmap"] = "heightmap.hgt";
  j["labels"] = "labels.pgm";
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : s.boxes) j["boxes"].push_back(detail::box_json(b));
  j["ceiling"] = s.ceiling;
  j["ground_start"] = detail::pose_json(s.ground_start);
  j["dock_offset"] = {s.dock_offset.x, s.dock_offset.y, s.dock_offset.z};
  j["static_transform"] = transform_json(s.static_transform);
  j["seed"] = s.seed;
  j["expected_decision"] = s.expected_decision;
  j["beyond_region"] = s.beyond_region ? detail::box_json(*s.beyond_region) : nlohmann::json(nullptr);
  j["stairs_region"] = s.stairs_region ? detail::box_json(*s.stairs_region) : nlohmann::json(nullptr);
  std::ofstream(dir / "scenario.json") << j.dump(2) << '\n';

  Image<float> hm(s.width, s.height);
  hm.data = s.heights;
  std::ofstream hf(dir / "heightmap.hgt", std::ios::binary);
  write_float_grid(hf, hm, kHeightMagic);
  LabelImage lab(s.width, s.height);
  lab.data = s.labels;
  std::ofstream lf(dir / "labels.pgm", std::ios::binary);
  write_label_pgm(lf, lab);
}

/// Loads a manifest written by write_scenario; side files resolve relative to it.
inline Scenario read_scenario(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open scenario manifest: " + manifest.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  Scenario s;
  s.name = j.at("name").get<std::string>();
  s.resolution = j.at("resolution").get<double>();
  s.origin_x = j.at("origin").at(0).get<double>();
  s.origin_y = j.at("origin").at(1).get<double>();
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  const auto base = manifest.parent_path();
  std::ifstream hf(base / j.at("heightmap").get<std::string>(), std::ios::binary);
  if (!hf) throw std::runtime_error("cannot open heightmap");
  const auto hm = read_float_grid(hf, kHeightMagic);
  std::ifstream lf(base / j.at("labels").get<std::string>(), std::ios::binary);
  if (!lf) throw std::runtime_error("cannot open label grid");
  const auto lab = read_label_pgm(lf);
  if (hm.width != s.width || hm.height != s.height || lab.width != s.width || lab.height != s.height)
    throw std::invalid_argument("Scenario: side-file dimensions differ from the manifest");
  s.heights = hm.data;
  s.labels = lab.data;
  for (const auto& b : j.at("boxes")) s.boxes.push_back(detail::box_from_json(b));
  s.ceiling = j.at("ceiling").get<double>();
  s.ground_start = detail::pose_from_json(j.at("ground_start"));
  const auto& d = j.at("dock_offset");
  s.dock_offset = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
  s.static_transform = transform_from_json(j.at("static_transform"));
  s.seed = j.at("seed").get<std::uint64_t>();
  s.expected_decision = j.value("expected_decision", std::string{});
  if (j.contains("beyond_region") && !j["beyond_region"].is_null())
    s.beyond_region = detail::box_from_json(j["beyond_region"]);
  if (j.contains("stairs_region") && !j["stairs_region"].is_null())
    s.stairs_region = detail::box_from_json(j["stairs_region"]);
  s.validate();
  return s;
}

}  // namespace travex
