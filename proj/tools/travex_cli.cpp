// travex: scenario generation, mission runs, exports, benchmarks and
// wire-format validation.

#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "travex/bench.hpp"
#include "travex/config.hpp"
#include "travex/export.hpp"
#include "travex/graph.hpp"
#include "travex/mission.hpp"
#include "travex/protocol.hpp"
#include "travex/scenario.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kMissionFailure = 3;
constexpr int kUsage = 64;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

int gen_scenario(const std::string& kind, std::uint64_t seed, const fs::path& out) {
  const travex::Scenario s = travex::make_scenario(kind, seed);
  travex::write_scenario(out, s);
  std::cout << "wrote " << (out / "scenario.json").string() << " (" << kind << ", seed " << seed
            << ", expected " << s.expected_decision << ")\n";
  return kOk;
}

int run(const fs::path& scenario, const std::string& config, const fs::path& out) {
  travex::Scenario scene;
  travex::MissionConfig cfg;
  try {
    scene = travex::read_scenario(scenario);
    scene.validate();
    if (!config.empty()) cfg = travex::mission_config_from_json(read_json(config));
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(e.what());
  }
  const travex::MissionMetrics m = travex::run_mission(scene, cfg, out);
  std::cout << "scenario " << scene.name << ": outcome " << m.outcome << ", ground cycles " << m.cycles.size()
            << ", deployments " << m.deployments.size() << ", explored free voxels " << m.ground_explored_free
            << " ground / " << m.aerial_explored_free << " aerial\n";
  if (!m.failure.empty()) std::cerr << "mission failure: " << m.failure << '\n';
  return m.outcome == "failure" || m.outcome == "cycle_cap" ? kMissionFailure : kOk;
}

void write_out(const std::string& out, const std::function<void(std::ostream&)>& fn) {
  if (out.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream os(out, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + out);
  fn(os);
}

int export_file(const fs::path& in, const std::string& format, const std::string& out) {
  std::ifstream probe(in, std::ios::binary);
  if (!probe) throw ValidationError("cannot open " + in.string());
  char magic[4] = {};
  probe.read(magic, 4);
  probe.seekg(0);
  if (probe.gcount() == 4 && std::string(magic, 4) == "TVOX") {
    travex::VoxelMap map;
    try {
      map = travex::VoxelMap::load(probe);
    } catch (const std::exception& e) {
      throw ValidationError(e.what());
    }
    if (format == "pgm") write_out(out, [&](std::ostream& os) { travex::write_map_pgm(map, os); });
    else if (format == "csv") write_out(out, [&](std::ostream& os) { travex::write_map_csv(map, os); });
    else if (format == "json") write_out(out, [&](std::ostream& os) { os << travex::map_json(map).dump(2) << '\n'; });
    else throw ValidationError("format " + format + " does not apply to voxel maps");
    return kOk;
  }
  travex::ExplorationGraph g;
  try {
    g = travex::ExplorationGraph::from_json(read_json(in));
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(in.string() + ": not a voxel map or graph export: " + e.what());
  }
  if (format == "dot") write_out(out, [&](std::ostream& os) { os << g.to_dot(); });
  else if (format == "json") write_out(out, [&](std::ostream& os) { os << g.to_json().dump(2) << '\n'; });
  else if (format == "csv")
    write_out(out, [&](std::ostream& os) {
      os << "id,x,y,z,psi,gain,frontier\n";
      for (const auto& [id, n] : g.nodes())
        os << id << ',' << n.pose.x << ',' << n.pose.y << ',' << n.pose.z << ',' << n.pose.psi << ',' << n.gain << ','
           << (n.is_frontier ? 1 : 0) << '\n';
    });
  else throw ValidationError("format " + format + " does not apply to graphs");
  return kOk;
}

int bench(const std::vector<std::size_t>& sizes, std::size_t lookups, const std::string& out) {
  const auto report = travex::bench_voxel_lookup(sizes, lookups);
  for (const auto& r : report.rows)
    std::cout << "blocks " << r.blocks << ": hash " << r.hash_ns << " ns/lookup, tree " << r.tree_ns << " ns/lookup\n";
  std::cout << "hash latency ratio largest/smallest " << report.hash_ratio() << " (tree " << report.tree_ratio()
            << ")\n";
  if (!out.empty()) write_out(out, [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });
  return kOk;
}

int validate(const fs::path& file) {
  const auto bytes = read_bytes(file);
  try {
    const travex::UnifiedGraphMessage m = travex::decode(bytes);
    std::cout << "valid: mission " << m.mission_id << ", " << m.graph.node_count() << " nodes, "
              << m.graph.edge_count() << " edges, path of " << m.candidate_path.ids.size() << " nodes, "
              << m.frontier_ids.size() << " frontiers, " << bytes.size() << " bytes\n";
  } catch (const travex::ProtocolError& e) {
    throw ValidationError(e.what());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"travex: traversability-aware ground/aerial exploration"};
  app.set_version_flag("--version", "travex 1.0");
  bool emit_default = false;
  app.add_flag("--emit-default-config", emit_default, "Print the full default mission config as JSON");

  auto* gen = app.add_subcommand("gen-scenario", "Write a canned scenario");
  std::string kind;
  std::uint64_t seed = 1;
  std::string gen_out;
  gen->add_option("--kind", kind, "Scenario kind")->required()->check(CLI::IsMember(travex::canned_scenario_kinds()));
  gen->add_option("--seed", seed, "Scenario seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* run_cmd = app.add_subcommand("run", "Run a ground/aerial mission");
  std::string scenario, config, run_out;
  run_cmd->add_option("--scenario", scenario, "Scenario manifest (scenario.json)")->required();
  run_cmd->add_option("--config", config, "Mission config JSON (defaults if omitted)");
  run_cmd->add_option("--out", run_out, "Output directory")->required();

  auto* exp = app.add_subcommand("export", "Convert a voxel map snapshot or graph export");
  std::string map_file, format, exp_out;
  exp->add_option("--map", map_file, "Map snapshot (.tvox) or graph JSON")->required();
  exp->add_option("--format", format, "Output format")->required()->check(CLI::IsMember({"pgm", "csv", "dot", "json"}));
  exp->add_option("--out", exp_out, "Output file (stdout if omitted)");

  auto* bench_cmd = app.add_subcommand("bench", "Voxel lookup latency against map size");
  std::vector<std::size_t> sizes{1000, 10000, 100000};
  std::size_t lookups = 1'000'000;
  std::string bench_out;
  bench_cmd->add_option("--map-sizes", sizes, "Allocated block counts")->delimiter(',');
  bench_cmd->add_option("--lookups", lookups, "Lookups per size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bench_out, "JSON report file");

  auto* val = app.add_subcommand("validate", "Check a framed UnifiedGraphMessage");
  std::string message;
  val->add_option("--message", message, "Framed message file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (emit_default) {
      std::cout << nlohmann::json(travex::MissionConfig{}).dump(2) << '\n';
      return kOk;
    }
    if (gen->parsed()) return gen_scenario(kind, seed, gen_out);
    if (run_cmd->parsed()) return run(scenario, config, run_out);
    if (exp->parsed()) return export_file(map_file, format, exp_out);
    if (bench_cmd->parsed()) return bench(sizes, lookups, bench_out);
    if (val->parsed()) return validate(message);
    std::cerr << app.help();
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissionFailure;
  }
}
