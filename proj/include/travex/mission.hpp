#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "travex/confidence.hpp"
#include "travex/config.hpp"
#include "travex/elevation_grid.hpp"
#include "travex/graph.hpp"
#include "travex/protocol.hpp"
#include "travex/scenario.hpp"
#include "travex/semantic.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

struct CycleRecord {
  int step{0};  // movement ticks elapsed when the cycle planned
  int cycle{0};
  std::string agent;
  std::size_t explored_free{0};
  std::optional<NodeId> target;
  double path_length{0.0};
  std::optional<double> pi_c;
  std::string decision;
};

struct DeploymentEvent {
  int cycle{0};
  NodeId target_frontier{0};
  double target_gain{0.0};
};

struct MissionMetrics {
  std::string scenario;
  std::vector<CycleRecord> cycles;
  std::vector<DeploymentEvent> deployments;
  std::size_t ground_explored_free{0};
  std::size_t aerial_explored_free{0};
  std::size_t combined_explored_free{0};
  std::size_t aerial_free_beyond{0};
  std::size_t scene_free_voxels{0};
  double ground_coverage{0.0};
  double aerial_coverage{0.0};
  std::size_t message_bytes{0};
  std::size_t ground_snapshot_bytes{0};
  std::uint64_t cross_reads{0};
  std::string client_state;
  std::string server_state;
  bool shared_frontier_unreachable{false};
  bool cycle_cap_hit{false};
  bool failed{false};
  std::string failure;
  std::string outcome;  // "complete", "deploy", "failure" or "cycle_cap"
  // Stairs accounting: observed grid cells on the flight and their maximum trav_g.
  std::size_t stairs_cells_observed{0};
  double stairs_max_trav_g{0.0};
  std::optional<double> deploy_target_gain;
};

/// A voxel map tagged with its owning agent. Reads from another agent are
/// counted so the no-map-sharing property can be asserted.
class OwnedMap {
 public:
  OwnedMap(AgentKind owner, const VoxelMap::Config& cfg, std::uint64_t* cross_reads)
      : owner_(owner), map_(cfg), cross_reads_(cross_reads) {}
  VoxelMap& write(AgentKind who) { return access(who); }
  const VoxelMap& read(AgentKind who) { return access(who); }

 private:
  VoxelMap& access(AgentKind who) {
    if (who != owner_ && cross_reads_ != nullptr) ++*cross_reads_;
    return map_;
  }
  AgentKind owner_;
  VoxelMap map_;
  std::uint64_t* cross_reads_;
};

using VoxelSet = std::unordered_set<VoxelIndex, IndexHash>;

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string cycle_tag(const char* agent, int cycle) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_c%03d", agent, cycle);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

/// Voxels ever classified free, accumulated across cycles.
inline void accumulate_free(const VoxelMap& map, VoxelSet& ever_free) {
  map.for_each_voxel([&](const VoxelIndex& v, const Voxel& vox) {
    if (map.classify(&vox) == VoxelState::Free) ever_free.insert(v);
  });
}

/// Voxel count of free space in the scene, on the mission voxel lattice.
inline std::size_t scene_free_voxels(const Scenario& s, double vs) {
  std::size_t n = 0;
  const double x0 = s.origin_x, y0 = s.origin_y;
  const double x1 = x0 + s.width * s.resolution, y1 = y0 + s.height * s.resolution;
  for (double x = std::floor(x0 / vs) * vs + vs / 2; x < x1; x += vs)
    for (double y = std::floor(y0 / vs) * vs + vs / 2; y < y1; y += vs)
      for (double z = vs / 2; z < s.ceiling; z += vs)
        if (!s.solid({x, y, z})) ++n;
  return n;
}

}  // namespace detail

struct PlanOutput {
  ExplorationGraph local{GraphLevel::Local};
  ExplorationGraph pathways{GraphLevel::Pathways};
  ExplorationGraph candidate{GraphLevel::Candidate};
  std::vector<ScoredPath> scored;
  DeploymentDecision decision;
};

/// One planning cycle: sample, score frontiers, build the hierarchy, score
/// candidate paths and decide.
inline PlanOutput plan_cycle(const VoxelMap& map, const TraversabilityGrid* grid, const RobotState& root,
                             GraphConfig gcfg, const MissionConfig& cfg, FrontierRegistry& registry,
                             const std::vector<Point3>& reached, std::uint64_t seed) {
  PlanOutput out;
  try {
    out.local = sample_local_graph(map, grid, root, gcfg, seed);
  } catch (const SamplingStarved&) {
    gcfg.window_x *= cfg.window_growth;
    gcfg.window_y *= cfg.window_growth;
    gcfg.samples = static_cast<int>(gcfg.samples * cfg.window_growth);
    out.local = sample_local_graph(map, grid, root, gcfg, detail::splitmix(seed));
  }
  mark_frontiers(out.local, map, gcfg);
  registry.update(out.local, reached, map, gcfg);
  registry.suppress(out.local, reached, gcfg.cluster_radius);
  const auto paths = shortest_paths(out.local, 0);
  out.pathways = build_pathways_graph(out.local, paths);
  const auto candidates = select_candidate_paths(out.local, paths, gcfg.cluster_radius, gcfg.dtw_min);
  out.candidate = build_candidate_graph(out.pathways, candidates);
  std::map<NodeId, NodeScore> scores;
  for (const auto& [id, n] : out.candidate.nodes()) {
    scores[id] = node_confidence(n, grid, map, cfg.body, cfg.confidence, gcfg.agent);
    out.candidate.node(id).confidence = scores[id].confidence;
  }
  for (const auto& p : candidates) {
    std::vector<double> c;
    std::vector<bool> u;
    for (NodeId id : p.ids) {
      c.push_back(scores.at(id).confidence);
      u.push_back(scores.at(id).unknown);
    }
    const PathScore ps = path_confidence(c, cfg.confidence, u);
    Path scored = p;
    scored.confidence = ps.pi_c;
    out.scored.push_back({scored, ps.pi_c, ps.penalized});
  }
  out.decision = select_exploration_path(out.scored, cfg.confidence);
  return out;
}

/// Runs ground exploration, the hand-off and aerial continuation. Writes all
/// artifacts under `out_dir` when given.
class Mission {
 public:
  Mission(Scenario scene, MissionConfig cfg, std::optional<std::filesystem::path> out_dir = std::nullopt)
      : scene_(std::move(scene)),
        cfg_(std::move(cfg)),
        out_(std::move(out_dir)),
        ground_map_(AgentKind::Ground, cfg_.voxel, &metrics_.cross_reads),
        aerial_map_(AgentKind::Aerial, cfg_.voxel, &metrics_.cross_reads),
        grid_(cfg_.grid) {
    scene_.validate();
    cfg_.validate();
    metrics_.scenario = scene_.name;
    if (out_) {
      std::filesystem::create_directories(*out_);
      if (cfg_.write_cycle_outputs) {
        std::filesystem::create_directories(*out_ / "graphs");
        std::filesystem::create_directories(*out_ / "grids");
      }
      std::filesystem::create_directories(*out_ / "maps");
      decisions_.open(*out_ / "decisions.jsonl", std::ios::binary);
      aerial_decisions_.open(*out_ / "aerial_decisions.jsonl", std::ios::binary);
    }
  }

  MissionMetrics run() {
    run_ground();
    if (handoff_) run_aerial();
    finish();
    return metrics_;
  }

  const MissionMetrics& metrics() const { return metrics_; }
  const std::optional<UnifiedGraphMessage>& handoff_message() const { return handoff_; }

 private:
  // ---- ground ------------------------------------------------------------

  void ground_sense() {
    const auto scan = simulate_lidar(scene_, ground_pose_, cfg_.ground_lidar);
    std::vector<Point3> pts;
    std::vector<LabeledPoint> labeled;
    pts.reserve(scan.size());
    labeled.reserve(scan.size());
    for (const auto& r : scan) {
      pts.push_back(r.point);
      labeled.push_back({r.point, traversability_decay(cfg_.alpha(r.cls), r.slope)});
    }
    grid_.integrate_scan(pts, ground_pose_);
    grid_.fill_unobserved(footprint_polygon(ground_pose_, cfg_.body), ground_pose_.z - cfg_.ground_graph.z_offset);
    grid_.compute_features();
    grid_.apply_risk(cfg_.risk);
    const Point3 origin{ground_pose_.x, ground_pose_.y, ground_pose_.z + cfg_.ground_lidar.mount_height};
    ground_map_.write(AgentKind::Ground).integrate_labeled_cloud(labeled, origin);
    const double half = 0.5 * cfg_.body.width;
    const double support = ground_pose_.z - cfg_.ground_graph.z_offset;
    ground_map_.write(AgentKind::Ground)
        .mark_free_box({ground_pose_.x - half, ground_pose_.y - half, support + cfg_.voxel.voxel_size},
                       {ground_pose_.x + half, ground_pose_.y + half, support + cfg_.body.height});
    last_scan_ = std::move(pts);
    record_stairs();
  }

  void record_stairs() {
    if (!scene_.stairs_region) return;
    const Box& r = *scene_.stairs_region;
    for (int j = 0; j < grid_.height(); ++j)
      for (int i = 0; i < grid_.width(); ++i) {
        const auto c = grid_.cell_center(i, j);
        if (c.x < r.min.x || c.x > r.max.x || c.y < r.min.y || c.y > r.max.y) continue;
        const auto& cell = grid_.at(i, j);
        if (!cell.trav_g) continue;
        stairs_cells_.insert({static_cast<std::int64_t>(std::floor(c.x / grid_.resolution())),
                              static_cast<std::int64_t>(std::floor(c.y / grid_.resolution())), 0});
        metrics_.stairs_max_trav_g = std::max(metrics_.stairs_max_trav_g, *cell.trav_g);
      }
    metrics_.stairs_cells_observed = stairs_cells_.size();
  }

  void run_ground() {
    const double start_z = scene_.support_height(scene_.ground_start.x, scene_.ground_start.y) +
                           cfg_.ground_graph.z_offset;
    ground_pose_ = RobotState(scene_.ground_start.x, scene_.ground_start.y, start_z, scene_.ground_start.psi);
    ground_sense();
    for (int cycle = 0;; ++cycle) {
      if (cycle >= cfg_.max_ground_cycles) {
        metrics_.cycle_cap_hit = true;
        metrics_.outcome = "cycle_cap";
        return;
      }
      const VoxelMap& map = ground_map_.read(AgentKind::Ground);
      PlanOutput plan;
      try {
        plan = plan_cycle(map, &grid_, ground_pose_, cfg_.ground_graph, cfg_, ground_registry_, ground_reached_,
                          detail::splitmix(scene_.seed * 1000003ULL + static_cast<std::uint64_t>(cycle)));
      } catch (const SamplingStarved& e) {
        metrics_.failed = true;
        metrics_.failure = e.what();
        metrics_.outcome = "failure";
        return;
      }
      emit_cycle("ground", cycle, plan, decisions_);
      detail::accumulate_free(map, ground_free_);
      CycleRecord rec{ticks_, cycle, "ground", ground_free_.size(), std::nullopt, 0.0, std::nullopt, ""};
      const auto& d = plan.decision;
      if (d.target_path) {
        rec.target = d.target_path->terminal();
        rec.path_length = d.target_path->length;
        rec.pi_c = d.target_path->confidence;
      }
      rec.decision = d.mission_complete() ? "mission_complete" : to_string(d.reason);
      metrics_.cycles.push_back(rec);
      if (d.mission_complete()) {
        metrics_.outcome = "complete";
        return;
      }
      if (d.deploy) {
        metrics_.deployments.push_back({cycle, d.target_path->terminal(), plan.candidate.node(d.target_path->terminal()).gain});
        metrics_.deploy_target_gain = metrics_.deployments.back().target_gain;
        metrics_.outcome = "deploy";
        hand_off(plan, *d.target_path);
        return;
      }
      // Drivable: visit each node of the chosen path, sensing at each.
      for (std::size_t k = 1; k < d.target_path->ids.size(); ++k) {
        ground_pose_ = plan.local.node(d.target_path->ids[k]).pose;
        ++ticks_;
        ground_sense();
      }
      ground_reached_.push_back(ground_pose_.position());
    }
  }

  // ---- hand-off ------------------------------------------------------------

  void hand_off(const PlanOutput& plan, const Path& target) {
    const UnifiedGraphMessage msg =
        build_unified_graph(plan.candidate, target, ground_registry_, scene_.static_transform, cfg_.mission_id,
                            scan_metadata(last_scan_));
    const Bytes wire = encode(msg);
    metrics_.message_bytes = wire.size();
    {
      std::ostringstream snap;
      ground_map_.read(AgentKind::Ground).save(snap);
      metrics_.ground_snapshot_bytes = snap.str().size();
    }
    // Lock-step exchange over a virtual clock; payloads are delivered in order.
    ActionClient client(msg, cfg_.protocol_timeout);
    ActionServer server([](const UnifiedGraphMessage&) { return std::optional<std::uint8_t>(kResultExplorationStarted); },
                        cfg_.protocol_timeout, 4.0 * cfg_.protocol_timeout);
    server.start(0.0);
    std::deque<Bytes> to_server;
    std::deque<Bytes> to_client;
    for (auto& b : client.start(0.0)) to_server.push_back(std::move(b));
    double t = 0.0;
    while (!(client.exchange().terminal() && server.exchange().terminal())) {
      t += 0.001;
      if (!to_server.empty()) {
        const Bytes b = std::move(to_server.front());
        to_server.pop_front();
        for (auto& r : server.on_payload(b, t)) to_client.push_back(std::move(r));
      } else if (!to_client.empty()) {
        const Bytes b = std::move(to_client.front());
        to_client.pop_front();
        for (auto& r : client.on_payload(b, t)) to_server.push_back(std::move(r));
      } else {
        t = std::max(client.exchange().terminal() ? t : client.deadline(),
                     server.exchange().terminal() ? t : server.deadline());
        for (auto& r : client.poll(t)) to_server.push_back(std::move(r));
        for (auto& r : server.poll(t)) to_client.push_back(std::move(r));
      }
    }
    metrics_.client_state = to_string(client.exchange().state());
    metrics_.server_state = to_string(server.exchange().state());
    if (server.exchange().state() == ExchangeState::Done) handoff_ = server.message();
    if (out_) {
      detail::write_text(*out_ / "handoff.frame", std::string(wire.begin(), wire.end()));
      detail::write_text(*out_ / "unified.json", msg.graph.to_json().dump(1) + "\n");
      detail::write_text(*out_ / "unified.dot", msg.graph.to_dot());
    }
  }

  // ---- aerial --------------------------------------------------------------

  Point3 to_aerial(const Point3& world) const { return transform_point(world, aerial_from_world_); }

  void aerial_sense() {
    const RobotState world = apply_static_transform(handoff_->static_transform, aerial_pose_);
    const auto scan = simulate_lidar(scene_, world, cfg_.aerial_lidar);
    std::vector<LabeledPoint> labeled;
    labeled.reserve(scan.size());
    for (const auto& r : scan)
      labeled.push_back({to_aerial(r.point), traversability_decay(cfg_.alpha(r.cls), r.slope)});
    const Point3 origin = to_aerial({world.x, world.y, world.z + cfg_.aerial_lidar.mount_height});
    aerial_map_.write(AgentKind::Aerial).integrate_labeled_cloud(labeled, origin);
  }

  void aerial_move(const Point3& p_aerial, double psi) {
    aerial_pose_ = RobotState(p_aerial.x, p_aerial.y, p_aerial.z, psi);
    ++ticks_;
    aerial_sense();
  }

  void run_aerial() {
    const UnifiedGraphMessage& msg = *handoff_;
    aerial_from_world_ = msg.static_transform.inverse();
    const Point3 dock = ground_pose_.position() + scene_.dock_offset;
    const Point3 start = to_aerial(dock);
    aerial_pose_ = RobotState(start.x, start.y, start.z, ground_pose_.psi - msg.static_transform.yaw());
    aerial_sense();

    // Follow the shared path to the hand-off frontier, raised by the dock height.
    {
      CollisionChecker checker(aerial_map_.read(AgentKind::Aerial), nullptr, cfg_.aerial_graph);
      for (NodeId id : msg.candidate_path.ids) {
        const Point3 w = msg.graph.node(id).pose.position() + Point3{0.0, 0.0, scene_.dock_offset.z};
        const Point3 p = to_aerial(w);
        if (distance(p, aerial_pose_.position()) < 1e-9) continue;
        if (!checker.edge_free(aerial_pose_.position(), p, EdgeMode::AerialFrontierApproach)) {
          metrics_.shared_frontier_unreachable = true;
          break;
        }
        aerial_move(p, std::atan2(p.y - aerial_pose_.y, p.x - aerial_pose_.x));
      }
    }
    aerial_reached_.push_back(aerial_pose_.position());

    for (int cycle = 0; cycle < cfg_.max_aerial_cycles; ++cycle) {
      const VoxelMap& map = aerial_map_.read(AgentKind::Aerial);
      PlanOutput plan;
      try {
        plan = plan_cycle(map, nullptr, aerial_pose_, cfg_.aerial_graph, cfg_, aerial_registry_, aerial_reached_,
                          detail::splitmix(scene_.seed * 7919ULL + 0xae71a1ULL + static_cast<std::uint64_t>(cycle)));
      } catch (const SamplingStarved&) {
        record_aerial(cycle, "sampling_starved", std::nullopt);
        break;
      }
      emit_cycle("aerial", cycle, plan, aerial_decisions_);
      if (plan.scored.empty()) {
        record_aerial(cycle, "mission_complete", std::nullopt);
        break;
      }
      // Gain-only confidence; the aerial agent always flies its best path.
      const Path target = *plan.decision.target_path;
      record_aerial(cycle, "fly", target);
      for (std::size_t k = 1; k < target.ids.size(); ++k) {
        const auto& n = plan.local.node(target.ids[k]);
        aerial_move(n.pose.position(), n.pose.psi);
      }
      aerial_reached_.push_back(aerial_pose_.position());
    }
  }

  void record_aerial(int cycle, const std::string& decision, const std::optional<Path>& target) {
    detail::accumulate_free(aerial_map_.read(AgentKind::Aerial), aerial_free_);
    CycleRecord rec{ticks_, cycle, "aerial", aerial_free_.size(), std::nullopt, 0.0, std::nullopt, decision};
    if (target) {
      rec.target = target->terminal();
      rec.path_length = target->length;
      rec.pi_c = target->confidence;
    }
    metrics_.cycles.push_back(rec);
  }

  // ---- outputs -------------------------------------------------------------

  void emit_cycle(const char* agent, int cycle, const PlanOutput& plan, std::ofstream& log) {
    if (!out_) return;
    write_decision_record(log, static_cast<std::uint64_t>(cycle), plan.scored, plan.decision);
    if (!cfg_.write_cycle_outputs) return;
    const std::string tag = detail::cycle_tag(agent, cycle);
    for (const ExplorationGraph* g : {&plan.local, &plan.pathways, &plan.candidate}) {
      const std::string base = tag + "_" + to_string(g->level());
      detail::write_text(*out_ / "graphs" / (base + ".json"), g->to_json().dump() + "\n");
      detail::write_text(*out_ / "graphs" / (base + ".dot"), g->to_dot());
    }
    if (std::string(agent) == "ground") {
      std::ofstream pgm(*out_ / "grids" / (tag + ".pgm"), std::ios::binary);
      grid_.write_pgm(pgm);
    }
  }

  void finish() {
    metrics_.ground_explored_free = ground_free_.size();
    if (handoff_) detail::accumulate_free(aerial_map_.read(AgentKind::Aerial), aerial_free_);
    metrics_.aerial_explored_free = aerial_free_.size();
    // Aerial voxels are re-expressed in the ground frame by their centres.
    VoxelSet combined = ground_free_;
    if (handoff_) {
      const VoxelMap::Config& vc = cfg_.voxel;
      VoxelMap lattice(vc);
      for (const auto& v : aerial_free_) {
        const Point3 c = transform_point(lattice.voxel_center(v), handoff_->static_transform);
        combined.insert(lattice.voxel_index(c));
        if (scene_.beyond_region && scene_.beyond_region->contains(c)) ++metrics_.aerial_free_beyond;
      }
    }
    metrics_.combined_explored_free = combined.size();
    metrics_.scene_free_voxels = detail::scene_free_voxels(scene_, cfg_.voxel.voxel_size);
    if (metrics_.scene_free_voxels > 0) {
      metrics_.ground_coverage = static_cast<double>(metrics_.ground_explored_free) / metrics_.scene_free_voxels;
      metrics_.aerial_coverage = static_cast<double>(metrics_.aerial_explored_free) / metrics_.scene_free_voxels;
    }
    if (!out_) return;
    write_metrics_csv();
    detail::write_text(*out_ / "summary.json", summary_json().dump(2) + "\n");
    {
      std::ofstream f(*out_ / "maps" / "ground.tvox", std::ios::binary);
      ground_map_.read(AgentKind::Ground).save(f);
    }
    if (handoff_) {
      std::ofstream f(*out_ / "maps" / "aerial.tvox", std::ios::binary);
      aerial_map_.read(AgentKind::Aerial).save(f);
    }
    std::ofstream grid_csv(*out_ / "grid_final.csv", std::ios::binary);
    grid_.write_csv(grid_csv);
    std::ofstream grid_pgm(*out_ / "grid_final.pgm", std::ios::binary);
    grid_.write_pgm(grid_pgm);
    std::ofstream cfg_out(*out_ / "config_used.json", std::ios::binary);
    cfg_out << nlohmann::json(cfg_).dump(2) << '\n';
  }

  void write_metrics_csv() {
    std::ofstream f(*out_ / "metrics.csv", std::ios::binary);
    f << "step,cycle,agent,explored_free,target_id,path_length,pi_c,decision\n";
    char buf[256];
    for (const auto& r : metrics_.cycles) {
      std::string pi = r.pi_c ? std::to_string(0) : "";
      if (r.pi_c) {
        std::snprintf(buf, sizeof(buf), "%.9g", *r.pi_c);
        pi = buf;
      }
      std::snprintf(buf, sizeof(buf), "%d,%d,%s,%zu,%s,%.9g,%s,%s\n", r.step, r.cycle, r.agent.c_str(),
                    r.explored_free, r.target ? std::to_string(*r.target).c_str() : "", r.path_length, pi.c_str(),
                    r.decision.c_str());
      f << buf;
    }
  }

 public:
  nlohmann::json summary_json() const {
    nlohmann::json j;
    j["scenario"] = metrics_.scenario;
    j["outcome"] = metrics_.outcome;
    j["expected_decision"] = scene_.expected_decision;
    j["deployments"] = nlohmann::json::array();
    for (const auto& d : metrics_.deployments)
      j["deployments"].push_back({{"cycle", d.cycle}, {"target_frontier", d.target_frontier}, {"gain", d.target_gain}});
    j["ground_explored_free"] = metrics_.ground_explored_free;
    j["aerial_explored_free"] = metrics_.aerial_explored_free;
    j["combined_explored_free"] = metrics_.combined_explored_free;
    j["aerial_free_beyond"] = metrics_.aerial_free_beyond;
    j["scene_free_voxels"] = metrics_.scene_free_voxels;
    j["ground_coverage"] = metrics_.ground_coverage;
    j["aerial_coverage"] = metrics_.aerial_coverage;
    j["message_bytes"] = metrics_.message_bytes;
    j["ground_snapshot_bytes"] = metrics_.ground_snapshot_bytes;
    j["cross_reads"] = metrics_.cross_reads;
    j["client_state"] = metrics_.client_state;
    j["server_state"] = metrics_.server_state;
    j["shared_frontier_unreachable"] = metrics_.shared_frontier_unreachable;
    j["cycle_cap_hit"] = metrics_.cycle_cap_hit;
    j["failed"] = metrics_.failed;
    j["failure"] = metrics_.failure;
    j["stairs_cells_observed"] = metrics_.stairs_cells_observed;
    j["stairs_max_trav_g"] = metrics_.stairs_max_trav_g;
    j["cycles"] = metrics_.cycles.size();
    j["ticks"] = ticks_;
    return j;
  }

 private:
  Scenario scene_;
  MissionConfig cfg_;
  std::optional<std::filesystem::path> out_;
  MissionMetrics metrics_;
  OwnedMap ground_map_;
  OwnedMap aerial_map_;
  TraversabilityGrid grid_;
  FrontierRegistry ground_registry_;
  FrontierRegistry aerial_registry_;
  std::vector<Point3> ground_reached_;
  std::vector<Point3> aerial_reached_;
  RobotState ground_pose_;
  RobotState aerial_pose_;
  RigidTransform aerial_from_world_;
  std::vector<Point3> last_scan_;
  std::optional<UnifiedGraphMessage> handoff_;
  VoxelSet ground_free_;
  VoxelSet aerial_free_;
  VoxelSet stairs_cells_;
  std::ofstream decisions_;
  std::ofstream aerial_decisions_;
  int ticks_{0};
};

inline MissionMetrics run_mission(const Scenario& scene, const MissionConfig& cfg,
                                  const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  Mission m(scene, cfg, out_dir);
  return m.run();
}

}  // namespace travex
