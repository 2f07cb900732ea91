#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "travex/elevation_grid.hpp"
#include "travex/geometry.hpp"
#include "travex/kdtree.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

enum class GraphLevel : std::uint8_t { Local = 0, Pathways = 1, Candidate = 2, Unified = 3 };
enum class AgentKind : std::uint8_t { Ground = 0, Aerial = 1 };

inline const char* to_string(GraphLevel l) {
  switch (l) {
    case GraphLevel::Local: return "local";
    case GraphLevel::Pathways: return "pathways";
    case GraphLevel::Candidate: return "candidate";
    case GraphLevel::Unified: return "unified";
  }
  return "?";
}

inline GraphLevel graph_level_from_string(const std::string& s) {
  if (s == "local") return GraphLevel::Local;
  if (s == "pathways") return GraphLevel::Pathways;
  if (s == "candidate") return GraphLevel::Candidate;
  if (s == "unified") return GraphLevel::Unified;
  throw std::invalid_argument("unknown graph level: " + s);
}

using NodeId = std::uint32_t;

struct GraphNode {
  NodeId id{0};
  RobotState pose;
  double gain{0.0};
  bool is_frontier{false};
  std::optional<double> confidence;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct Edge {
  NodeId a{0};
  NodeId b{0};
  double length{0.0};
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected simple graph; node and adjacency containers are ordered so
/// iteration and exports are deterministic.
class ExplorationGraph {
 public:
  explicit ExplorationGraph(GraphLevel level = GraphLevel::Local) : level_(level) {}

  GraphLevel level() const { return level_; }
  void set_level(GraphLevel l) { level_ = l; }

  void add_node(const GraphNode& n) {
    if (!nodes_.emplace(n.id, n).second) throw std::invalid_argument("ExplorationGraph: duplicate node id");
    adjacency_[n.id];
  }

  /// Adds an edge with Euclidean length; false if it already exists.
  bool add_edge(NodeId a, NodeId b) {
    if (a == b) throw std::invalid_argument("ExplorationGraph: self-loop");
    if (!has_node(a) || !has_node(b)) throw std::invalid_argument("ExplorationGraph: edge references missing node");
    if (adjacency_[a].count(b) != 0) return false;
    const double len = distance(nodes_.at(a).pose.position(), nodes_.at(b).pose.position());
    adjacency_[a][b] = len;
    adjacency_[b][a] = len;
    return true;
  }

  void remove_node(NodeId id) {
    for (const auto& [nb, _] : adjacency_.at(id)) adjacency_[nb].erase(id);
    adjacency_.erase(id);
    nodes_.erase(id);
  }

  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  bool has_edge(NodeId a, NodeId b) const {
    const auto it = adjacency_.find(a);
    return it != adjacency_.end() && it->second.count(b) != 0;
  }
  const GraphNode& node(NodeId id) const { return nodes_.at(id); }
  GraphNode& node(NodeId id) { return nodes_.at(id); }
  const std::map<NodeId, GraphNode>& nodes() const { return nodes_; }
  const std::map<NodeId, double>& neighbors(NodeId id) const { return adjacency_.at(id); }
  std::size_t node_count() const { return nodes_.size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, nbrs] : adjacency_) n += nbrs.size();
    return n / 2;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (const auto& [a, nbrs] : adjacency_)
      for (const auto& [b, len] : nbrs)
        if (a < b) out.push_back({a, b, len});
    return out;
  }

  std::vector<NodeId> frontier_ids() const {
    std::vector<NodeId> out;
    for (const auto& [id, n] : nodes_)
      if (n.is_frontier) out.push_back(id);
    return out;
  }

  /// Node-induced subgraph.
  ExplorationGraph induced(const std::set<NodeId>& ids, GraphLevel level) const {
    ExplorationGraph g(level);
    for (NodeId id : ids) g.add_node(nodes_.at(id));
    for (NodeId id : ids)
      for (const auto& [nb, len] : adjacency_.at(id))
        if (id < nb && ids.count(nb) != 0) {
          g.adjacency_[id][nb] = len;
          g.adjacency_[nb][id] = len;
        }
    return g;
  }

  /// Ids reachable from `root`.
  std::set<NodeId> component(NodeId root) const {
    std::set<NodeId> seen{root};
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const auto& [v, _] : adjacency_.at(u))
        if (seen.insert(v).second) stack.push_back(v);
    }
    return seen;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["level"] = to_string(level_);
    j["nodes"] = nlohmann::json::array();
    for (const auto& [id, n] : nodes_) {
      nlohmann::json jn;
      jn["id"] = id;
      jn["x"] = n.pose.x;
      jn["y"] = n.pose.y;
      jn["z"] = n.pose.z;
      jn["psi"] = n.pose.psi;
      jn["gain"] = n.gain;
      jn["frontier"] = n.is_frontier;
      jn["confidence"] = n.confidence ? nlohmann::json(*n.confidence) : nlohmann::json(nullptr);
      j["nodes"].push_back(jn);
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& e : edges()) j["edges"].push_back({e.a, e.b, e.length});
    return j;
  }

  static ExplorationGraph from_json(const nlohmann::json& j) {
    ExplorationGraph g(graph_level_from_string(j.at("level").get<std::string>()));
    for (const auto& jn : j.at("nodes")) {
      GraphNode n;
      n.id = jn.at("id").get<NodeId>();
      n.pose = RobotState(jn.at("x").get<double>(), jn.at("y").get<double>(), jn.at("z").get<double>(),
                          jn.at("psi").get<double>());
      n.gain = jn.at("gain").get<double>();
      n.is_frontier = jn.at("frontier").get<bool>();
      if (!jn.at("confidence").is_null()) n.confidence = jn.at("confidence").get<double>();
      g.add_node(n);
    }
    for (const auto& je : j.at("edges")) g.add_edge(je.at(0).get<NodeId>(), je.at(1).get<NodeId>());
    return g;
  }

  std::string to_dot() const {
    std::ostringstream os;
    os << "graph " << to_string(level_) << " {\n";
    char buf[160];
    for (const auto& [id, n] : nodes_) {
      std::snprintf(buf, sizeof(buf), "  n%u [pos=\"%.3f,%.3f!\" gain=%.4f%s];\n", id, n.pose.x, n.pose.y, n.gain,
                    n.is_frontier ? " color=red" : "");
      os << buf;
    }
    for (const auto& e : edges()) {
      std::snprintf(buf, sizeof(buf), "  n%u -- n%u [len=%.4f];\n", e.a, e.b, e.length);
      os << buf;
    }
    os << "}\n";
    return os.str();
  }

 private:
  GraphLevel level_;
  std::map<NodeId, GraphNode> nodes_;
  std::map<NodeId, std::map<NodeId, double>> adjacency_;
};

struct Path {
  std::vector<NodeId> ids;
  double length{0.0};
  std::optional<double> confidence;

  NodeId terminal() const { return ids.back(); }
  friend bool operator==(const Path&, const Path&) = default;
};

inline double path_length(const ExplorationGraph& g, const std::vector<NodeId>& ids) {
  double len = 0.0;
  for (std::size_t i = 1; i < ids.size(); ++i) len += g.neighbors(ids[i - 1]).at(ids[i]);
  return len;
}

inline std::vector<Point3> path_positions(const ExplorationGraph& g, const Path& p) {
  std::vector<Point3> out;
  out.reserve(p.ids.size());
  for (NodeId id : p.ids) out.push_back(g.node(id).pose.position());
  return out;
}

// ---------------------------------------------------------------------------
// Sampling and collision checking

struct GraphConfig {
  AgentKind agent{AgentKind::Ground};
  int samples{300};
  int neighbors{7};
  double window_x{20.0};
  double window_y{20.0};
  double window_z{6.0};
  double r_safe_ground{0.4};
  double r_safe_aerial{0.5};
  double z_offset{0.3};
  // Ground body column: occupied voxels between support + body_clearance and
  // support + body_height that the terrain map does not explain block a pose.
  double body_clearance{0.4};
  double body_height{0.8};
  // A ground pose needs a support cell whose step feature is at most this.
  double max_support_step{0.5};
  // Ground poses may rest on the nearest featured grid cell within this radius.
  double support_radius{0.3};
  int max_attempts_per_sample{40};
  double cluster_radius{2.0};
  double dtw_min{4.0};
  double phi_min{0.4};
  int min_nodes{5};
  GainWeights gain{};
  double frustum_hfov{kPi / 2.0};
  double frustum_vfov{kPi / 3.0};
  double frustum_range{3.0};

  double r_safe() const { return agent == AgentKind::Ground ? r_safe_ground : r_safe_aerial; }
};

enum class EdgeMode : std::uint8_t {
  Ground,
  Aerial,
  // Terminal segment of a shared candidate path: unknown space is permitted.
  AerialFrontierApproach,
};

class SamplingStarved : public std::runtime_error {
 public:
  explicit SamplingStarved(std::size_t survivors)
      : std::runtime_error("sampling starved: " + std::to_string(survivors) + " nodes survived"), survivors_(survivors) {}
  std::size_t survivors() const { return survivors_; }

 private:
  std::size_t survivors_;
};

/// Bucketed occupied-voxel centres for fast radius queries.
class OccupiedIndex {
 public:
  OccupiedIndex(const VoxelMap& map, double bucket) : map_(map), bucket_(bucket) {}

  /// Indexes occupied voxels lazily, one map block at a time.
  template <typename Fn>
  bool any_within(const Point3& p, double radius, Fn&& accept) {
    const double r2 = radius * radius;
    const auto lo = bucket_of({p.x - radius, p.y - radius, p.z - radius});
    const auto hi = bucket_of({p.x + radius, p.y + radius, p.z + radius});
    for (auto k = lo.k; k <= hi.k; ++k)
      for (auto j = lo.j; j <= hi.j; ++j)
        for (auto i = lo.i; i <= hi.i; ++i)
          for (const Point3& c : bucket({i, j, k})) {
            const Point3 d = c - p;
            if (d.dot(d) <= r2 && accept(c)) return true;
          }
    return false;
  }

 private:
  VoxelIndex bucket_of(const Point3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / bucket_)), static_cast<std::int64_t>(std::floor(p.y / bucket_)),
            static_cast<std::int64_t>(std::floor(p.z / bucket_))};
  }

  const std::vector<Point3>& bucket(const VoxelIndex& b) {
    auto it = buckets_.find(b);
    if (it != buckets_.end()) return it->second;
    std::vector<Point3> pts;
    const VoxelIndex lo = map_.voxel_index({b.i * bucket_, b.j * bucket_, b.k * bucket_});
    const VoxelIndex hi = map_.voxel_index({(b.i + 1) * bucket_, (b.j + 1) * bucket_, (b.k + 1) * bucket_});
    for (auto k = lo.k; k <= hi.k; ++k)
      for (auto j = lo.j; j <= hi.j; ++j)
        for (auto i = lo.i; i <= hi.i; ++i) {
          const Point3 c = map_.voxel_center({i, j, k});
          if (!(bucket_of(c) == b)) continue;
          if (map_.state({i, j, k}) == VoxelState::Occupied) pts.push_back(c);
        }
    return buckets_.emplace(b, std::move(pts)).first->second;
  }

  const VoxelMap& map_;
  double bucket_;
  std::unordered_map<VoxelIndex, std::vector<Point3>, IndexHash> buckets_;
};

/// Pose and edge feasibility for one agent against one map snapshot.
class CollisionChecker {
 public:
  CollisionChecker(const VoxelMap& map, const TraversabilityGrid* grid, const GraphConfig& cfg)
      : map_(map), grid_(grid), cfg_(cfg), occupied_(map, std::max(cfg.r_safe(), map.voxel_size())) {
    if (cfg.agent == AgentKind::Ground && grid == nullptr)
      throw std::invalid_argument("CollisionChecker: ground agent needs a traversability grid");
  }

  const GraphConfig& config() const { return cfg_; }

  /// Support elevation for a ground pose at (x, y), if the terrain there can
  /// carry the robot at all.
  std::optional<double> ground_support(double x, double y) const {
    const GridCell* cell = grid_->nearest_featured(x, y, cfg_.support_radius);
    if (cell == nullptr || !cell->elevation) return std::nullopt;
    if (*cell->step > cfg_.max_support_step) return std::nullopt;
    return *cell->elevation;
  }

  /// Ground body column test at (x, y) resting on `support`.
  bool ground_column_clear(double x, double y, double support) {
    const double z_lo = support + cfg_.body_clearance;
    const double z_hi = support + cfg_.body_height;
    const double r = cfg_.r_safe_ground;
    const Point3 mid{x, y, 0.5 * (z_lo + z_hi)};
    const double reach = std::sqrt(r * r + 0.25 * (z_hi - z_lo) * (z_hi - z_lo));
    return !occupied_.any_within(mid, reach, [&](const Point3& c) {
      if (c.z < z_lo || c.z > z_hi) return false;
      if (std::hypot(c.x - x, c.y - y) > r) return false;
      // Voxels the elevation map already explains are terrain, not obstacles.
      const auto e = grid_->elevation_at(c.x, c.y);
      return !(e && c.z <= *e + cfg_.body_clearance);
    });
  }

  /// Ground pose at (x, y); returns the body position when feasible.
  std::optional<Point3> ground_pose(double x, double y) {
    const auto g = ground_support(x, y);
    if (!g) return std::nullopt;
    const Point3 q{x, y, *g + cfg_.z_offset};
    if (map_.voxel_state(q) != VoxelState::Free) return std::nullopt;
    if (!ground_column_clear(x, y, *g)) return std::nullopt;
    return q;
  }

  /// Aerial pose: free voxel and no occupied or unknown voxel centre within r_safe.
  bool aerial_pose_free(const Point3& q) const {
    if (map_.voxel_state(q) != VoxelState::Free) return false;
    const double r = cfg_.r_safe_aerial;
    const double r2 = r * r;
    const VoxelIndex lo = map_.voxel_index({q.x - r, q.y - r, q.z - r});
    const VoxelIndex hi = map_.voxel_index({q.x + r, q.y + r, q.z + r});
    for (auto k = lo.k; k <= hi.k; ++k)
      for (auto j = lo.j; j <= hi.j; ++j)
        for (auto i = lo.i; i <= hi.i; ++i) {
          const Point3 d = map_.voxel_center({i, j, k}) - q;
          if (d.dot(d) > r2) continue;
          if (map_.state({i, j, k}) != VoxelState::Free) return false;
        }
    return true;
  }

  /// Clearance is not re-checked within r_safe of `p`, the pose the agent
  /// currently occupies.
  void exempt_around(const Point3& p) { exempt_ = p; }

  bool occupied_within(const Point3& p, double r) {
    return occupied_.any_within(p, r, [](const Point3&) { return true; });
  }

  /// Segment feasibility: raycast first, then clearance at voxel_size/2 spacing.
  bool edge_free(const Point3& a, const Point3& b, EdgeMode mode) {
    const Point3 d = b - a;
    const double len = d.norm();
    if (len > 0.0) {
      const Point3 dir = (1.0 / len) * d;
      if (mode == EdgeMode::AerialFrontierApproach) {
        bool hit = false;
        map_.traverse(a, dir, len, [&](const VoxelIndex& vi, double) {
          if (map_.state(vi) == VoxelState::Occupied) {
            hit = true;
            return false;
          }
          return true;
        });
        if (hit) return false;
      } else {
        const auto hit = map_.raycast(a, dir, len);
        if (hit && hit->distance < len) return false;
      }
    }
    const double step = map_.voxel_size() / 2.0;
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int s = 0; s <= n; ++s) {
      const Point3 p = a + (static_cast<double>(s) / n) * d;
      if (exempt_ && distance(p, *exempt_) <= cfg_.r_safe()) continue;
      if (mode == EdgeMode::Ground) {
        const auto g = ground_support(p.x, p.y);
        if (!g || !ground_column_clear(p.x, p.y, *g)) return false;
      } else if (occupied_within(p, cfg_.r_safe_aerial)) {
        return false;
      }
      if (len == 0.0) break;
    }
    return true;
  }

 private:
  const VoxelMap& map_;
  const TraversabilityGrid* grid_;
  GraphConfig cfg_;
  OccupiedIndex occupied_;
  std::optional<Point3> exempt_;
};

/// Aerial-semantics segment check: raycast plus occupied clearance r_safe.
inline bool edge_collision_free(const VoxelMap& map, const Point3& a, const Point3& b, double r_safe,
                                EdgeMode mode = EdgeMode::Aerial) {
  if (mode == EdgeMode::Ground) throw std::invalid_argument("edge_collision_free: ground edges need a grid");
  GraphConfig cfg;
  cfg.agent = AgentKind::Aerial;
  cfg.r_safe_aerial = r_safe;
  CollisionChecker checker(map, nullptr, cfg);
  return checker.edge_free(a, b, mode);
}

/// Samples a local roadmap around `root`, connects k nearest neighbours with
/// collision-free edges and keeps the root's component. Node 0 is the root.
inline ExplorationGraph sample_local_graph(const VoxelMap& map, const TraversabilityGrid* grid, const RobotState& root,
                                           const GraphConfig& cfg, std::uint64_t seed) {
  CollisionChecker checker(map, grid, cfg);
  std::mt19937_64 rng(seed);
  // The window is clipped to the observed part of the map.
  Point3 lo{root.x - cfg.window_x / 2.0, root.y - cfg.window_y / 2.0, -cfg.window_z / 2.0};
  Point3 hi{root.x + cfg.window_x / 2.0, root.y + cfg.window_y / 2.0, cfg.window_z / 2.0};
  if (const auto b = map.observed_bounds()) {
    lo.x = std::max(lo.x, b->first.x);
    lo.y = std::max(lo.y, b->first.y);
    hi.x = std::max(lo.x, std::min(hi.x, b->second.x));
    hi.y = std::max(lo.y, std::min(hi.y, b->second.y));
    if (cfg.agent == AgentKind::Aerial) {
      lo.z = std::max(lo.z, b->first.z - root.z);
      hi.z = std::max(lo.z, std::min(hi.z, b->second.z - root.z));
    }
  }
  std::uniform_real_distribution<double> ux(lo.x, std::nextafter(hi.x, hi.x + 1.0));
  std::uniform_real_distribution<double> uy(lo.y, std::nextafter(hi.y, hi.y + 1.0));
  std::uniform_real_distribution<double> uz(lo.z, std::nextafter(hi.z, hi.z + 1.0));

  std::vector<RobotState> poses{root};
  // Draws until `samples` poses (root included) are accepted or the attempt
  // budget runs out.
  const long budget = static_cast<long>(cfg.samples) * cfg.max_attempts_per_sample;
  for (long attempt = 0; attempt < budget && poses.size() < static_cast<std::size_t>(cfg.samples); ++attempt) {
    const double x = ux(rng);
    const double y = uy(rng);
    const double dz = uz(rng);
    Point3 q;
    if (cfg.agent == AgentKind::Ground) {
      const auto body = checker.ground_pose(x, y);
      if (!body) continue;
      q = *body;
    } else {
      q = {x, y, root.z + dz};
      if (!checker.aerial_pose_free(q)) continue;
    }
    const double psi = (q.x == root.x && q.y == root.y) ? root.psi : std::atan2(q.y - root.y, q.x - root.x);
    poses.emplace_back(q.x, q.y, q.z, psi);
  }

  ExplorationGraph g(GraphLevel::Local);
  std::vector<Point3> pts;
  pts.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    g.add_node({static_cast<NodeId>(i), poses[i], 0.0, false, std::nullopt});
    pts.push_back(poses[i].position());
  }
  const KdTree tree(pts);
  checker.exempt_around(root.position());
  const EdgeMode mode = cfg.agent == AgentKind::Ground ? EdgeMode::Ground : EdgeMode::Aerial;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j : tree.knn(pts[i], static_cast<std::size_t>(cfg.neighbors), i)) {
      const auto a = static_cast<NodeId>(i);
      const auto b = static_cast<NodeId>(j);
      if (g.has_edge(a, b)) continue;
      if (checker.edge_free(pts[i], pts[j], mode)) g.add_edge(a, b);
    }
  }
  const auto keep = g.component(0);
  if (keep.size() < static_cast<std::size_t>(cfg.min_nodes)) throw SamplingStarved(keep.size());
  return g.induced(keep, GraphLevel::Local);
}

inline SensorFrustum frustum_at(const RobotState& pose, const GraphConfig& cfg) {
  return {pose, cfg.frustum_hfov, cfg.frustum_vfov, cfg.frustum_range};
}

/// Computes every node's gain from a frustum census and flags frontiers.
inline void mark_frontiers(ExplorationGraph& g, const VoxelMap& map, const GraphConfig& cfg) {
  for (const auto& [id, n] : g.nodes()) {
    GraphNode& node = g.node(id);
    node.gain = volumetric_gain(map.frustum_census(frustum_at(n.pose, cfg)), cfg.gain);
    node.is_frontier = node.gain > cfg.phi_min;
  }
}

/// Dijkstra from `root` to every frontier; ties go to the smaller predecessor id.
inline std::map<NodeId, Path> shortest_paths(const ExplorationGraph& g, NodeId root) {
  if (!g.has_node(root)) throw std::invalid_argument("shortest_paths: root not in graph");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<NodeId, double> dist;
  std::map<NodeId, NodeId> pred;
  for (const auto& [id, _] : g.nodes()) dist[id] = inf;
  dist[root] = 0.0;
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, root});
  std::set<NodeId> done;
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (!done.insert(u).second) continue;
    for (const auto& [v, w] : g.neighbors(u)) {
      if (done.count(v) != 0) continue;
      const double nd = d + w;
      if (nd < dist[v]) {
        dist[v] = nd;
        pred[v] = u;
        pq.push({nd, v});
      } else if (nd == dist[v] && u < pred[v]) {
        pred[v] = u;
      }
    }
  }
  std::map<NodeId, Path> out;
  for (const auto& [id, n] : g.nodes()) {
    if (!n.is_frontier || id == root || dist[id] == inf) continue;
    Path p;
    for (NodeId cur = id;; cur = pred.at(cur)) {
      p.ids.push_back(cur);
      if (cur == root) break;
    }
    std::reverse(p.ids.begin(), p.ids.end());
    p.length = path_length(g, p.ids);
    out.emplace(id, std::move(p));
  }
  return out;
}

/// Union of path nodes, with every local edge between surviving nodes.
inline ExplorationGraph build_pathways_graph(const ExplorationGraph& local, const std::map<NodeId, Path>& paths,
                                             GraphLevel level = GraphLevel::Pathways) {
  std::set<NodeId> ids;
  for (const auto& [_, p] : paths) ids.insert(p.ids.begin(), p.ids.end());
  return local.induced(ids, level);
}

inline ExplorationGraph build_candidate_graph(const ExplorationGraph& pathways, const std::vector<Path>& candidates) {
  std::set<NodeId> ids;
  for (const auto& p : candidates) ids.insert(p.ids.begin(), p.ids.end());
  return pathways.induced(ids, GraphLevel::Candidate);
}

/// Dynamic time warping with match/insert/delete steps and Euclidean cost.
inline double dtw_distance(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty sequence");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double c = distance(a[i - 1], b[j - 1]);
      cur[j] = c + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Single-linkage clusters (radius `rho`) of the given frontier ids, each
/// cluster sorted, clusters ordered by their smallest id.
inline std::vector<std::vector<NodeId>> cluster_frontiers(const ExplorationGraph& g, const std::vector<NodeId>& ids,
                                                          double rho) {
  std::vector<NodeId> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> parent(sorted.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < sorted.size(); ++i)
    for (std::size_t j = i + 1; j < sorted.size(); ++j)
      if (distance(g.node(sorted[i]).pose.position(), g.node(sorted[j]).pose.position()) <= rho) {
        const auto ri = find(i);
        const auto rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
  std::map<std::size_t, std::vector<NodeId>> groups;
  for (std::size_t i = 0; i < sorted.size(); ++i) groups[find(i)].push_back(sorted[i]);
  std::vector<std::vector<NodeId>> out;
  for (auto& [_, v] : groups) out.push_back(std::move(v));
  return out;
}

/// Shortest path per frontier cluster, then greedy DTW de-duplication in
/// ascending (length, terminal id) order.
inline std::vector<Path> select_candidate_paths(const ExplorationGraph& g, const std::map<NodeId, Path>& paths,
                                                double rho, double dtw_min) {
  std::vector<NodeId> terminals;
  for (const auto& [id, _] : paths) terminals.push_back(id);
  auto shorter = [](const Path& a, const Path& b) {
    return a.length < b.length || (a.length == b.length && a.terminal() < b.terminal());
  };
  std::vector<Path> reps;
  for (const auto& cluster : cluster_frontiers(g, terminals, rho)) {
    const Path* best = nullptr;
    for (NodeId id : cluster) {
      const Path& p = paths.at(id);
      if (best == nullptr || shorter(p, *best)) best = &p;
    }
    reps.push_back(*best);
  }
  std::sort(reps.begin(), reps.end(), shorter);
  std::vector<Path> kept;
  std::vector<std::vector<Point3>> kept_pos;
  for (const auto& p : reps) {
    const auto pos = path_positions(g, p);
    bool distinct = true;
    for (const auto& k : kept_pos)
      if (dtw_distance(pos, k) <= dtw_min) {
        distinct = false;
        break;
      }
    if (!distinct) continue;
    kept.push_back(p);
    kept_pos.push_back(pos);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Global frontier registry

enum class FrontierStatus : std::uint8_t { Open = 0, Consumed = 1, Shared = 2 };

inline const char* to_string(FrontierStatus s) {
  switch (s) {
    case FrontierStatus::Open: return "open";
    case FrontierStatus::Consumed: return "consumed";
    case FrontierStatus::Shared: return "shared";
  }
  return "?";
}

struct FrontierEntry {
  std::uint32_t id{0};
  RobotState pose;
  double gain{0.0};
  FrontierStatus status{FrontierStatus::Open};
};

class FrontierRegistry {
 public:
  const std::vector<FrontierEntry>& entries() const { return entries_; }
  std::vector<FrontierEntry>& entries() { return entries_; }

  std::vector<const FrontierEntry*> open() const {
    std::vector<const FrontierEntry*> out;
    for (const auto& e : entries_)
      if (e.status == FrontierStatus::Open) out.push_back(&e);
    return out;
  }

  /// True if `p` lies within `rho` of a consumed frontier.
  bool near_consumed(const Point3& p, double rho) const {
    for (const auto& e : entries_)
      if (e.status == FrontierStatus::Consumed && distance(e.pose.position(), p) <= rho) return true;
    return false;
  }

  FrontierEntry& add(const RobotState& pose, double gain, FrontierStatus status = FrontierStatus::Open) {
    entries_.push_back({next_id_++, pose, gain, status});
    return entries_.back();
  }

  void set_status(std::uint32_t id, FrontierStatus s) {
    for (auto& e : entries_)
      if (e.id == id) e.status = s;
  }

  /// Re-scores open frontiers, consumes those that collapsed or were
  /// visited, then adds the graph's new frontiers.
  void update(const ExplorationGraph& g, const std::vector<Point3>& trail, const VoxelMap& map,
              const GraphConfig& cfg) {
    const double rho = cfg.cluster_radius;
    auto near_trail = [&](const Point3& p) {
      return std::any_of(trail.begin(), trail.end(), [&](const Point3& t) { return distance(t, p) <= rho; });
    };
    for (auto& e : entries_) {
      if (e.status != FrontierStatus::Open) continue;
      e.gain = volumetric_gain(map.frustum_census(frustum_at(e.pose, cfg)), cfg.gain);
      if (e.gain <= cfg.phi_min || near_trail(e.pose.position())) e.status = FrontierStatus::Consumed;
    }
    for (const auto& [id, n] : g.nodes()) {
      if (!n.is_frontier) continue;
      const Point3 p = n.pose.position();
      if (near_consumed(p, rho) || near_trail(p)) continue;
      bool merged = false;
      for (auto& e : entries_)
        if (e.status != FrontierStatus::Consumed && distance(e.pose.position(), p) <= rho) {
          merged = true;
          break;
        }
      if (!merged) add(n.pose, n.gain);
    }
  }

  /// Clears the frontier flag on graph nodes near a consumed frontier or a
  /// reached target, so visited regions are not planned to again.
  void suppress(ExplorationGraph& g, const std::vector<Point3>& reached, double rho) const {
    for (const auto& [id, n] : g.nodes()) {
      if (!n.is_frontier) continue;
      const Point3 p = n.pose.position();
      const bool near_reached =
          std::any_of(reached.begin(), reached.end(), [&](const Point3& t) { return distance(t, p) <= rho; });
      if (near_reached || near_consumed(p, rho)) g.node(id).is_frontier = false;
    }
  }

 private:
  std::vector<FrontierEntry> entries_;
  std::uint32_t next_id_{0};
};

}  // namespace travex
