#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "travex/confidence.hpp"
#include "travex/elevation_grid.hpp"
#include "travex/graph.hpp"
#include "travex/scenario.hpp"
#include "travex/semantic.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

/// Every tunable of a mission run. Serialized in full so runs are self-describing.
struct MissionConfig {
  std::string mission_id{"travex-mission"};
  VoxelMap::Config voxel{};
  TraversabilityGrid::Config grid{0.1, 20.0, 0.9, 1.5};
  GeometricRiskParams risk{};
  AlphaTable alpha{};
  BoundingBox body{};
  GraphConfig ground_graph{};
  GraphConfig aerial_graph{make_aerial_graph()};
  ConfidenceParams confidence{};
  LidarConfig ground_lidar{360, 128, -1.2, 0.5, 8.0, 0.5};
  LidarConfig aerial_lidar{360, 48, -1.0, 1.0, 8.0, 0.0};
  int max_ground_cycles{40};
  int max_aerial_cycles{12};
  double window_growth{1.5};
  double protocol_timeout{5.0};
  bool write_cycle_outputs{true};

  static GraphConfig make_aerial_graph() {
    GraphConfig g;
    g.agent = AgentKind::Aerial;
    g.window_z = 3.0;
    return g;
  }

  void validate() const {
    if (mission_id.empty()) throw std::invalid_argument("config: mission_id must not be empty");
    VoxelMap probe(voxel);
    (void)probe;
    if (!(grid.resolution > 0.0) || !(grid.window > 0.0)) throw std::invalid_argument("config: bad grid geometry");
    if (!(grid.elevation_percentile >= 0.0 && grid.elevation_percentile <= 1.0))
      throw std::invalid_argument("config: elevation_percentile outside [0,1]");
    risk.validate();
    alpha.validate();
    BoundingBox check(body.length, body.width, body.height);
    (void)check;
    for (const GraphConfig* g : {&ground_graph, &aerial_graph}) {
      if (g->samples <= 0 || g->neighbors <= 0 || g->min_nodes <= 0 || g->max_attempts_per_sample <= 0)
        throw std::invalid_argument("config: graph sample/neighbour/min-node counts must be positive");
      if (!(g->window_x > 0 && g->window_y > 0 && g->window_z >= 0))
        throw std::invalid_argument("config: graph window must be positive");
      if (!(g->cluster_radius > 0) || g->dtw_min < 0 || !(g->r_safe() > 0))
        throw std::invalid_argument("config: bad graph radii");
      SensorFrustum{RobotState{}, g->frustum_hfov, g->frustum_vfov, g->frustum_range}.validate();
    }
    if (ground_graph.agent != AgentKind::Ground || aerial_graph.agent != AgentKind::Aerial)
      throw std::invalid_argument("config: graph agent kinds are fixed (ground_graph/aerial_graph)");
    confidence.validate();
    ground_lidar.validate();
    aerial_lidar.validate();
    if (max_ground_cycles <= 0 || max_aerial_cycles < 0) throw std::invalid_argument("config: bad cycle caps");
    if (!(window_growth >= 1.0)) throw std::invalid_argument("config: window_growth must be >= 1");
    if (!(protocol_timeout > 0.0)) throw std::invalid_argument("config: protocol_timeout must be positive");
  }
};

NLOHMANN_JSON_SERIALIZE_ENUM(AgentKind, {{AgentKind::Ground, "ground"}, {AgentKind::Aerial, "aerial"}})

// The macros need default-constructible types; the nested configs qualify.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GainWeights, unknown, free, occupied)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeometricRiskParams, w_slope, w_roughness, w_step, slope_crit,
                                                roughness_crit, step_crit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AlphaTable, alpha)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BoundingBox, length, width, height)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GraphConfig, agent, samples, neighbors, window_x, window_y, window_z,
                                                r_safe_ground, r_safe_aerial, z_offset, body_clearance, body_height,
                                                max_support_step, support_radius,
                                                max_attempts_per_sample, cluster_radius, dtw_min, phi_min, min_nodes, gain,
                                                frustum_hfov, frustum_vfov, frustum_range)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ConfidenceParams, w_g, w_sem, w_v, c_crit, lambda, c_deploy,
                                                semantic_depth, semantic_halfspan)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LidarConfig, rays, channels, min_elevation, max_elevation, max_range,
                                                mount_height)

inline void to_json(nlohmann::json& j, const VoxelMap::Config& c) {
  j = {{"voxel_size", c.voxel_size},
       {"block_side", c.block_side},
       {"truncation", c.truncation},
       {"occupancy_threshold", c.occupancy_threshold}};
}
inline void from_json(const nlohmann::json& j, VoxelMap::Config& c) {
  const VoxelMap::Config d{};
  c.voxel_size = j.value("voxel_size", d.voxel_size);
  c.block_side = j.value("block_side", d.block_side);
  c.truncation = j.value("truncation", d.truncation);
  c.occupancy_threshold = j.value("occupancy_threshold", d.occupancy_threshold);
}

inline void to_json(nlohmann::json& j, const TraversabilityGrid::Config& c) {
  j = {{"resolution", c.resolution},
       {"window", c.window},
       {"elevation_percentile", c.elevation_percentile},
       {"max_height_above_robot", c.max_height_above_robot}};
}
inline void from_json(const nlohmann::json& j, TraversabilityGrid::Config& c) {
  c.resolution = j.value("resolution", c.resolution);
  c.window = j.value("window", c.window);
  c.elevation_percentile = j.value("elevation_percentile", c.elevation_percentile);
  c.max_height_above_robot = j.value("max_height_above_robot", c.max_height_above_robot);
}

inline void to_json(nlohmann::json& j, const MissionConfig& c) {
  j = {{"mission_id", c.mission_id},
       {"voxel", c.voxel},
       {"grid", c.grid},
       {"risk", c.risk},
       {"alpha", c.alpha},
       {"body", c.body},
       {"ground_graph", c.ground_graph},
       {"aerial_graph", c.aerial_graph},
       {"confidence", c.confidence},
       {"ground_lidar", c.ground_lidar},
       {"aerial_lidar", c.aerial_lidar},
       {"max_ground_cycles", c.max_ground_cycles},
       {"max_aerial_cycles", c.max_aerial_cycles},
       {"window_growth", c.window_growth},
       {"protocol_timeout", c.protocol_timeout},
       {"write_cycle_outputs", c.write_cycle_outputs}};
}

namespace detail {

/// Rejects keys the reference (a serialized default) does not know.
inline void check_known_keys(const nlohmann::json& in, const nlohmann::json& ref, const std::string& path) {
  if (!in.is_object()) return;
  if (!ref.is_object()) throw std::invalid_argument("config: " + path + " must not be an object");
  for (const auto& [k, v] : in.items()) {
    if (!ref.contains(k)) throw std::invalid_argument("config: unknown key " + path + k);
    check_known_keys(v, ref.at(k), path + k + ".");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  T parsed = out;
  if constexpr (std::is_class_v<T> && !std::is_same_v<T, std::string>) {
    nlohmann::json merged = out;
    merged.merge_patch(j.at(key));
    parsed = merged.get<T>();
  } else {
    parsed = j.at(key).get<T>();
  }
  out = parsed;
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys and bad values throw.
inline MissionConfig mission_config_from_json(const nlohmann::json& j) {
  MissionConfig c;
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  detail::check_known_keys(j, nlohmann::json(c), "");
  try {
    detail::read_field(j, "mission_id", c.mission_id);
    detail::read_field(j, "voxel", c.voxel);
    detail::read_field(j, "grid", c.grid);
    detail::read_field(j, "risk", c.risk);
    detail::read_field(j, "alpha", c.alpha);
    detail::read_field(j, "body", c.body);
    detail::read_field(j, "ground_graph", c.ground_graph);
    detail::read_field(j, "aerial_graph", c.aerial_graph);
    detail::read_field(j, "confidence", c.confidence);
    detail::read_field(j, "ground_lidar", c.ground_lidar);
    detail::read_field(j, "aerial_lidar", c.aerial_lidar);
    detail::read_field(j, "max_ground_cycles", c.max_ground_cycles);
    detail::read_field(j, "max_aerial_cycles", c.max_aerial_cycles);
    detail::read_field(j, "window_growth", c.window_growth);
    detail::read_field(j, "protocol_timeout", c.protocol_timeout);
    detail::read_field(j, "write_cycle_outputs", c.write_cycle_outputs);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace travex
