#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "travex/elevation_grid.hpp"
#include "travex/geometry.hpp"
#include "travex/graph.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

struct ConfidenceParams {
  double w_g{1.0};
  double w_sem{1.0};
  double w_v{0.5};
  double c_crit{0.7};
  double lambda{1.0};
  double c_deploy{0.45};
  // Vertical window for semantic voxels, measured down from the node pose.
  double semantic_depth{0.3};
  double semantic_halfspan{0.3};

  void validate() const {
    if (w_g < 0.0 || w_sem < 0.0 || w_v < 0.0) throw std::invalid_argument("ConfidenceParams: negative weight");
    if (!(c_crit > 0.0 && c_crit < 1.0)) throw std::invalid_argument("ConfidenceParams: C_crit must lie in (0,1)");
    if (lambda < 0.0) throw std::invalid_argument("ConfidenceParams: lambda must be >= 0");
    if (c_deploy < 0.0 || c_deploy > 1.0) throw std::invalid_argument("ConfidenceParams: C_deploy outside [0,1]");
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct NodeScore {
  double confidence{0.5};
  bool unknown{false};  // terrain under the footprint was unobserved
  std::optional<double> trav_g;
  std::optional<double> trav_s;
  double gain{0.0};
};

/// Sigmoid of weighted terrain and gain terms; unobserved terrain scores 0.5
/// and sets the unknown flag.
inline double confidence_from_terms(double tg, double ts, double gain, const ConfidenceParams& p) {
  return sigmoid(p.w_g * tg + p.w_sem * ts + p.w_v * gain);
}

inline NodeScore node_confidence(const GraphNode& node, const TraversabilityGrid* grid, const VoxelMap& map,
                                 const BoundingBox& box, const ConfidenceParams& p, AgentKind agent) {
  NodeScore s;
  s.gain = node.gain;
  if (agent == AgentKind::Aerial) {
    s.confidence = sigmoid(p.w_v * node.gain);
    return s;
  }
  if (grid == nullptr) throw std::invalid_argument("node_confidence: ground agent needs a grid");
  const FootprintPolygon poly = footprint_polygon(node.pose, box);
  s.trav_g = grid->avg_geometric_traversability(poly);
  s.trav_s = map.avg_semantic_traversability(poly, node.pose.z - p.semantic_depth, p.semantic_halfspan);
  s.unknown = !s.trav_g || !s.trav_s;
  s.confidence = confidence_from_terms(s.trav_g.value_or(0.5), s.trav_s.value_or(0.5), node.gain, p);
  return s;
}

struct PathScore {
  double pi_c{0.0};
  bool penalized{false};
};

/// Mean node confidence over the path, scaled by exp(-lambda) when any node
/// is at or below C_crit or flagged unknown.
inline PathScore path_confidence(std::span<const double> confidences, const ConfidenceParams& p,
                                 const std::vector<bool>& unknown = {}) {
  if (confidences.empty()) throw std::invalid_argument("path_confidence: empty path");
  if (!unknown.empty() && unknown.size() != confidences.size())
    throw std::invalid_argument("path_confidence: flag count mismatch");
  double sum = 0.0;
  bool low = false;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    sum += confidences[i];
    if (confidences[i] <= p.c_crit || (!unknown.empty() && unknown[i])) low = true;
  }
  double pi = sum / static_cast<double>(confidences.size());
  if (low) pi *= std::exp(-p.lambda);
  return {std::clamp(pi, 0.0, 1.0), low};
}

struct ScoredPath {
  Path path;
  double pi_c{0.0};
  bool penalized{false};
};

enum class DeploymentReason : std::uint8_t { Drivable, AllPathsLowConfidence, NoFrontiers };

inline const char* to_string(DeploymentReason r) {
  switch (r) {
    case DeploymentReason::Drivable: return "drivable";
    case DeploymentReason::AllPathsLowConfidence: return "all_paths_low_confidence";
    case DeploymentReason::NoFrontiers: return "no_frontiers";
  }
  return "?";
}

struct DeploymentDecision {
  bool deploy{false};
  std::optional<Path> target_path;
  DeploymentReason reason{DeploymentReason::NoFrontiers};

  bool mission_complete() const { return reason == DeploymentReason::NoFrontiers && !deploy; }
};

/// Picks the drivable path or the aerial hand-off target. `retained` is a
/// low-confidence path kept from an earlier halt, used when no candidates remain.
inline DeploymentDecision select_exploration_path(const std::vector<ScoredPath>& candidates, const ConfidenceParams& p,
                                                  const std::optional<Path>& retained = std::nullopt) {
  DeploymentDecision d;
  if (candidates.empty()) {
    d.reason = DeploymentReason::NoFrontiers;
    if (retained) {
      d.deploy = true;
      d.target_path = retained;
    }
    return d;
  }
  const ScoredPath* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.pi_c > best->pi_c) {
      best = &c;
    } else if (c.pi_c == best->pi_c) {
      if (c.path.length < best->path.length ||
          (c.path.length == best->path.length && c.path.terminal() < best->path.terminal()))
        best = &c;
    }
  }
  Path target = best->path;
  target.confidence = best->pi_c;
  d.target_path = target;
  if (best->pi_c >= p.c_deploy) {
    d.reason = DeploymentReason::Drivable;
    d.deploy = false;
  } else {
    d.reason = DeploymentReason::AllPathsLowConfidence;
    d.deploy = true;
  }
  return d;
}

/// One JSON-lines record per planning cycle.
inline nlohmann::json decision_record(std::uint64_t cycle, const std::vector<ScoredPath>& candidates,
                                      const DeploymentDecision& d) {
  nlohmann::json j;
  j["cycle"] = cycle;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : candidates)
    j["candidates"].push_back(
        {{"terminal_id", c.path.terminal()}, {"length", c.path.length}, {"pi_c", c.pi_c}, {"penalized", c.penalized}});
  j["decision"] = d.mission_complete() ? "mission_complete" : to_string(d.reason);
  j["deploy"] = d.deploy;
  j["target_id"] = d.target_path ? nlohmann::json(d.target_path->terminal()) : nlohmann::json(nullptr);
  return j;
}

inline void write_decision_record(std::ostream& os, std::uint64_t cycle, const std::vector<ScoredPath>& candidates,
                                  const DeploymentDecision& d) {
  os << decision_record(cycle, candidates, d).dump() << '\n';
}

}  // namespace travex
