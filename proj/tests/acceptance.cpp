// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are fixed below and printed with each result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/exchange.hpp"
#include "support/golden.hpp"
#include "support/oracles.hpp"
#include "travex/bench.hpp"
#include "travex/confidence.hpp"
#include "travex/elevation_grid.hpp"
#include "travex/geometry.hpp"
#include "travex/graph.hpp"
#include "travex/mission.hpp"
#include "travex/protocol.hpp"
#include "travex/scenario.hpp"
#include "travex/semantic.hpp"
#include "travex/voxel_map.hpp"

using namespace travex;
namespace fs = std::filesystem;

namespace {

constexpr double kRelTol = 1e-9;
constexpr double kAbsTol = 1e-9;
constexpr double kHashRatioMax = 2.0;
constexpr double kMessageFractionMax = 0.01;

struct Outcome {
  bool pass{true};
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool rel_close(double got, double want) {
  if (got == want) return true;
  return std::abs(got - want) <= kRelTol * std::max(std::abs(want), std::abs(got));
}

// 1 ---------------------------------------------------------------------------

Outcome equation_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int zeroed = 0, penalized = 0, plain = 0;
  for (int n = 0; n < 1000; ++n) {
    GeometricRiskParams p;
    const double a = u(rng), b = u(rng) * (1 - a);
    p.w_slope = a;
    p.w_roughness = b;
    p.w_step = 1.0 - a - b;
    const double s = u(rng) * 0.7, r = u(rng) * 0.15, h = u(rng) * 0.4;
    const double risk = std::min(1.0, a * s / p.slope_crit + b * r / p.roughness_crit + p.w_step * h / p.step_crit);
    const bool hard = s >= p.slope_crit || r >= p.roughness_crit || h >= p.step_crit;
    zeroed += hard ? 1 : 0;
    o.require(rel_close(terrain_risk(s, r, h, p), risk), "risk");
    o.require(rel_close(geometric_traversability(s, r, h, p), hard ? 0.0 : 1.0 - risk), "geometric traversability");
  }
  const double alphas[] = {0.0, 0.25, 0.6, 1.0};
  for (int n = 0; n < 1000; ++n) {
    const double alpha = n % 5 == 4 ? u(rng) : alphas[n % 4];
    const double theta = u(rng) * 2.0 - 0.2;
    const double th = std::min(std::max(theta, 0.0), kPi / 2);
    const double want = alpha == 0.0 ? 0.0 : alpha * std::exp(-th / alpha);
    o.require(rel_close(traversability_decay(alpha, theta), want), "semantic decay");
  }
  for (int n = 0; n < 1000; ++n) {
    const VoxelCounts c{rng() % 500, rng() % 500, 1 + rng() % 500};
    GainWeights w{0.1 + u(rng), 0.05 + u(rng), 0.1 + u(rng)};
    const double tot = static_cast<double>(c.total());
    const double fu = c.unknown / tot, ff = c.free / tot, fo = c.occupied / tot;
    const double want = std::log((w.unknown * std::exp(fu) + w.free * std::exp(ff)) / (w.occupied * std::exp(fo)));
    o.require(rel_close(volumetric_gain(c, w), want), "volumetric gain");
  }
  for (int n = 0; n < 1000; ++n) {
    ConfidenceParams p;
    p.w_g = u(rng) * 2;
    p.w_sem = u(rng) * 2;
    p.w_v = u(rng) * 2;
    const double tg = u(rng), ts = u(rng), phi = u(rng) * 2.5 - 1.0;
    const double want = 1.0 / (1.0 + std::exp(-(p.w_g * tg + p.w_sem * ts + p.w_v * phi)));
    o.require(rel_close(confidence_from_terms(tg, ts, phi, p), want), "node confidence");
  }
  for (int n = 0; n < 1000; ++n) {
    ConfidenceParams p;
    p.c_crit = 0.05 + 0.9 * u(rng);
    p.lambda = 3.0 * u(rng);
    std::vector<double> c(1 + rng() % 10);
    double sum = 0.0;
    bool low = false;
    for (auto& v : c) {
      v = u(rng);
      sum += v;
      low = low || v <= p.c_crit;
    }
    const double mean = sum / static_cast<double>(c.size());
    const auto s = path_confidence(c, p);
    (low ? penalized : plain)++;
    o.require(s.penalized == low, "penalty branch");
    o.require(rel_close(s.pi_c, low ? mean * std::exp(-p.lambda) : mean), "path confidence");
  }
  const double secs = seconds_since(t0);
  o.require(zeroed > 0 && penalized > 0 && plain > 0, "branch coverage");
  o.require(secs < 5.0, "runtime");
  o.detail << "5 x 1000 cases, rel tol " << kRelTol << ", hard-zero " << zeroed << ", penalized " << penalized
           << ", unpenalized " << plain << ", " << secs << " s";
  return o;
}

// 2 ---------------------------------------------------------------------------

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> t(-5.0, 5.0);
  return RigidTransform::from_ypr(ang(rng), ang(rng) / 2, ang(rng), {t(rng), t(rng), t(rng)});
}

bool near(const Point3& a, const Point3& b) { return distance(a, b) <= kAbsTol * std::max(1.0, b.norm()); }

Outcome projection_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  const CameraIntrinsics k(100, 100, 50, 50, 100, 100);
  const auto centre = project_point_to_image({0, 0, 1}, RigidTransform::identity(), k);
  o.require(centre && std::abs(centre->u - 50) <= kAbsTol && std::abs(centre->v - 50) <= kAbsTol, "centre pixel");
  const auto off = project_point_to_image({0.1, 0.2, 1.0}, RigidTransform::identity(), k);
  o.require(off && std::abs(off->u - 60) <= kAbsTol && std::abs(off->v - 70) <= kAbsTol, "offset pixel");
  o.require(!project_point_to_image({0, 0, -1}, RigidTransform::identity(), k), "behind camera");

  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> p(-10.0, 10.0);
  for (int n = 0; n < 1000; ++n) {
    const RigidTransform a = random_transform(rng), b = random_transform(rng);
    const Point3 x{p(rng), p(rng), p(rng)};
    o.require(near(transform_point(transform_point(x, a), a.inverse()), x), "inverse round trip");
    o.require(near(transform_point(x, a.compose(b)), transform_point(transform_point(x, b), a)), "compose");
    o.require(std::abs(a.determinant() - 1.0) <= kAbsTol, "determinant");
  }

  const CameraIntrinsics cam(320, 300, 320, 240, 640, 480);
  std::uniform_real_distribution<double> xy(-0.4, 0.4);
  std::uniform_real_distribution<double> depth(0.5, 20.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  int projected = 0;
  for (int n = 0; n < 1000; ++n) {
    const RigidTransform ext = random_transform(rng);
    const double z = depth(rng);
    const Point3 c{xy(rng) * z, xy(rng) * z, z};
    const RigidTransform to_world = ext.inverse();
    const auto a = project_point_to_image(transform_point(c, to_world), ext, cam);
    const auto b = project_point_to_image(transform_point(scale(rng) * c, to_world), ext, cam);
    o.require(a.has_value() == b.has_value(), "scale changes visibility");
    if (a && b) {
      ++projected;
      o.require(std::abs(a->u - b->u) <= 1e-6 && std::abs(a->v - b->v) <= 1e-6, "scale invariance");
    }
  }
  const double secs = seconds_since(t0);
  o.require(projected > 900, "too few projected points");
  o.require(secs < 5.0, "runtime");
  o.detail << "examples + 1000 transform identities at " << kAbsTol << ", " << projected
           << "/1000 ray points pixel-invariant, " << secs << " s";
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome voxel_oracle_suite() {
  Outcome o;
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> pos(0.2, 2.8);
  int agree = 0, hits = 0;
  for (int map_id = 0; map_id < 3; ++map_id) {
    const VoxelMap m = travex::testing::random_voxel_map(rng, 30, 0.02 + 0.02 * map_id);
    for (int n = 0; n < 1000; ++n) {
      Point3 orig{pos(rng), pos(rng), pos(rng)};
      while (m.voxel_state(orig) != VoxelState::Free) orig = {pos(rng), pos(rng), pos(rng)};
      const Point3 d = travex::testing::random_unit(rng);
      const auto want = travex::testing::crossing_oracle(m, orig, d, 2.5);
      const auto got = m.raycast(orig, d, 2.5);
      const bool same = got.has_value() == want.has_value() && (!got || got->voxel == *want);
      agree += same ? 1 : 0;
      hits += got ? 1 : 0;
    }
  }
  o.require(agree == 3000, "raycast disagreement");

  // Labeled points on a floor patch, integrated in two orders.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LabeledPoint> cloud(4000);
  for (auto& p : cloud) p = {{1.0 + u(rng), 1.0 + u(rng), 0.05}, u(rng)};
  auto shuffled = cloud;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  VoxelMap a, b;
  a.integrate_labeled_cloud(cloud, {1.5, 1.5, 1.0});
  b.integrate_labeled_cloud(shuffled, {1.5, 1.5, 1.0});
  double worst = 0.0;
  std::size_t compared = 0;
  a.for_each_voxel([&](const VoxelIndex& vi, const Voxel& va) {
    const Voxel* vb = b.find(vi);
    if (vb == nullptr) {
      worst = std::numeric_limits<double>::infinity();
      return;
    }
    if (va.trav_weight > 0.0 || vb->trav_weight > 0.0) {
      worst = std::max(worst, std::abs(va.trav - vb->trav));
      ++compared;
    }
  });
  o.require(worst <= kAbsTol && compared > 0, "trav order sensitivity");
  o.detail << agree << "/3000 rays agree (" << hits << " hits), trav max diff " << worst << " over " << compared
           << " voxels";
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome hash_bench() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto report = bench_voxel_lookup({1000, 100000}, 1'000'000);
  const double secs = seconds_since(t0);
  o.require(report.hash_ratio() <= kHashRatioMax, "hash latency ratio");
  o.require(secs < 60.0, "runtime");
  o.detail << "hash " << report.rows.front().hash_ns << " ns @1k vs " << report.rows.back().hash_ns
           << " ns @100k blocks, ratio " << report.hash_ratio() << " (max " << kHashRatioMax << "), tree ratio "
           << report.tree_ratio() << ", " << secs << " s";
  return o;
}

// 5 ---------------------------------------------------------------------------

VoxelMap random_world(std::mt19937_64& rng) {
  using travex::testing::fill_box;
  VoxelMap m;
  fill_box(m, {0, 0, 0}, {29, 29, 29}, VoxelState::Free);
  std::uniform_int_distribution<int> c(0, 26);
  for (int b = 0; b < 6; ++b) {
    const int i = c(rng), j = c(rng), k = c(rng);
    if (std::abs(i - 14) < 6 && std::abs(j - 14) < 6 && std::abs(k - 14) < 6) continue;
    fill_box(m, {i, j, k}, {i + 3, j + 3, k + 3}, VoxelState::Occupied);
  }
  return m;
}

Outcome hierarchy_suite() {
  Outcome o;
  std::mt19937_64 rng(1005);
  GraphConfig cfg;
  cfg.agent = AgentKind::Aerial;
  cfg.samples = 40;
  cfg.r_safe_aerial = 0.3;
  int worlds = 0, with_candidates = 0;
  for (int n = 0; n < 100; ++n) {
    const VoxelMap m = random_world(rng);
    ExplorationGraph local;
    try {
      local = sample_local_graph(m, nullptr, RobotState(1.45, 1.45, 1.45, 0.0), cfg, 1000 + n);
    } catch (const SamplingStarved&) {
      continue;
    }
    ++worlds;
    mark_frontiers(local, m, cfg);
    const auto paths = shortest_paths(local, 0);
    const auto pw = build_pathways_graph(local, paths);
    const auto cands = select_candidate_paths(local, paths, cfg.cluster_radius, cfg.dtw_min);
    const auto cg = build_candidate_graph(pw, cands);
    with_candidates += cands.empty() ? 0 : 1;
    for (const auto& [id, _] : cg.nodes()) o.require(pw.has_node(id), "candidate node outside pathways");
    for (const auto& [id, _] : pw.nodes()) o.require(local.has_node(id), "pathways node outside local");
  }
  o.require(worlds == 100, "sampling starved");
  o.require(with_candidates >= 50, "too few worlds with candidates");

  int graphs = 0, pairs = 0;
  for (int n = 0; n < 300; ++n) {
    const auto g = travex::testing::random_graph(rng, 2 + static_cast<int>(rng() % 11), 0.35, 0.6);
    const auto paths = shortest_paths(g, 0);
    ++graphs;
    for (const auto& [id, node] : g.nodes()) {
      if (!node.is_frontier) continue;
      ++pairs;
      const double best = travex::testing::brute_shortest(g, 0, id);
      if (std::isinf(best)) {
        o.require(paths.count(id) == 0, "path to unreachable node");
        continue;
      }
      o.require(paths.count(id) == 1 && std::abs(paths.at(id).length - best) <= kAbsTol, "dijkstra vs brute force");
    }
  }

  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int dtw_exact = 0;
  for (int n = 0; n < 500; ++n) {
    std::vector<Point3> a(1 + rng() % 12), b(1 + rng() % 12);
    for (auto& p : a) p = {u(rng), u(rng), u(rng)};
    for (auto& p : b) p = {u(rng), u(rng), u(rng)};
    dtw_exact += dtw_distance(a, b) == travex::testing::dtw_oracle(a, b) ? 1 : 0;
  }
  o.require(dtw_exact == 500, "dtw mismatch");
  o.detail << "containment on " << worlds << " worlds (" << with_candidates << " with candidates), dijkstra on "
           << graphs << " graphs / " << pairs << " pairs, dtw exact " << dtw_exact << "/500";
  return o;
}

// 6, 7, 9 ---------------------------------------------------------------------

struct Run {
  MissionMetrics metrics;
  double seconds{0.0};
};

Run run_scenario(const std::string& kind, const fs::path& out) {
  fs::remove_all(out);
  const auto t0 = Clock::now();
  Run r;
  r.metrics = run_mission(make_scenario(kind, 1), MissionConfig{}, out);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome deployment_behavior(const Run& stairs, const Run& open, const MissionConfig& cfg) {
  Outcome o;
  const auto& s = stairs.metrics;
  o.require(s.stairs_cells_observed > 0, "no stair cells observed");
  o.require(s.stairs_max_trav_g == 0.0, "stairs traversable");
  o.require(s.deploy_target_gain && *s.deploy_target_gain > cfg.ground_graph.phi_min, "frontier gain");
  o.require(s.deployments.size() == 1, "stairs deployment count");
  o.require(open.metrics.deployments.empty(), "open-room deployment");
  o.require(stairs.seconds < 120.0 && open.seconds < 120.0, "runtime");
  o.detail << "stairs: " << s.stairs_cells_observed << " cells, max trav_g " << s.stairs_max_trav_g
           << ", target gain " << s.deploy_target_gain.value_or(-1.0) << ", " << s.deployments.size()
           << " deployment(s), " << stairs.seconds << " s; open: " << open.metrics.deployments.size()
           << " deployment(s), " << open.seconds << " s";
  return o;
}

Outcome handoff_efficiency(const Run& clutter) {
  Outcome o;
  const auto& m = clutter.metrics;
  const double frac = m.ground_snapshot_bytes == 0
                          ? 1.0
                          : static_cast<double>(m.message_bytes) / static_cast<double>(m.ground_snapshot_bytes);
  o.require(m.deployments.size() == 1, "clutter deployment");
  o.require(m.message_bytes > 0 && frac < kMessageFractionMax, "message size");
  o.require(m.aerial_free_beyond > 0, "aerial coverage beyond barrier");
  o.require(m.cross_reads == 0, "cross-agent map reads");
  o.detail << "message " << m.message_bytes << " B vs snapshot " << m.ground_snapshot_bytes << " B (" << 100.0 * frac
           << "%), aerial free beyond " << m.aerial_free_beyond << ", cross reads " << m.cross_reads;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<fs::path> listing(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism(const fs::path& first, const fs::path& second) {
  Outcome o;
  std::size_t files = 0;
  for (const auto& kind : canned_scenario_kinds()) {
    const auto a = listing(first / kind), b = listing(second / kind);
    o.require(!a.empty() && a == b, kind + " file sets differ");
    if (a != b) continue;
    for (const auto& f : a) {
      ++files;
      o.require(slurp(first / kind / f) == slurp(second / kind / f), kind + "/" + f.string() + " differs");
    }
  }
  o.detail << files << " files compared byte for byte across " << canned_scenario_kinds().size() << " scenarios";
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome protocol_conformance() {
  Outcome o;
  const auto t0 = Clock::now();
  std::ifstream in(std::string(TRAVEX_FIXTURE_DIR) + "/golden_request.frame", std::ios::binary);
  const Bytes golden{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  o.require(!golden.empty() && encode(travex::testing::golden_message()) == golden, "golden encode");
  try {
    o.require(decode(golden) == travex::testing::golden_message(), "golden decode");
  } catch (const std::exception& e) {
    o.require(false, std::string("golden decode: ") + e.what());
  }
  std::mt19937_64 rng(1008);
  for (int n = 0; n < 300; ++n) {
    const auto m = travex::testing::random_message(rng);
    const Bytes b = encode(m);
    o.require(decode(b) == m && encode(decode(b)) == b, "round trip");
  }
  int done = 0, rejected = 0, agree = 0;
  for (int n = 0; n < 200; ++n) {
    const double max_delay = (n % 4 == 0) ? 7.5 : 2.0;
    const auto r = travex::testing::simulate_exchange(travex::testing::random_message(rng), rng, 5.0, max_delay,
                                                      n % 17 == 0);
    agree += r.client == r.server ? 1 : 0;
    done += r.client == ExchangeState::Done ? 1 : 0;
    rejected += r.client == ExchangeState::Rejected ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  o.require(agree == 200, "terminal-state disagreement");
  o.require(rejected > 0 && done > 0, "interleavings lack both outcomes");
  o.require(secs < 30.0, "runtime");
  o.detail << "golden " << golden.size() << " B bit-exact, 300 round trips, " << agree << "/200 interleavings agree ("
           << done << " done, " << rejected << " rejected), " << secs << " s";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << name << ": " << o.detail.str() << std::endl;
    failures += o.pass ? 0 : 1;
  };
  report(1, "equation suite", equation_suite());
  report(2, "projection and transforms", projection_suite());
  report(3, "voxel map oracles", voxel_oracle_suite());
  report(4, "hash lookup flatness", hash_bench());
  report(5, "graph hierarchy", hierarchy_suite());

  const fs::path root = fs::temp_directory_path() / "travex_acceptance";
  fs::remove_all(root);
  std::map<std::string, Run> first;
  for (const auto& kind : canned_scenario_kinds()) first[kind] = run_scenario(kind, root / "a" / kind);
  report(6, "deployment behavior", deployment_behavior(first["stairs"], first["open"], MissionConfig{}));
  report(7, "hand-off efficiency", handoff_efficiency(first["clutter"]));
  report(8, "protocol conformance", protocol_conformance());
  for (const auto& kind : canned_scenario_kinds()) run_scenario(kind, root / "b" / kind);
  report(9, "determinism", determinism(root / "a", root / "b"));
  fs::remove_all(root);
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
