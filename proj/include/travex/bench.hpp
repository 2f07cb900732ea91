#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

struct LookupBenchRow {
  std::size_t blocks{0};
  double hash_ns{0.0};  // mean ns per voxel lookup through the block hash
  double tree_ns{0.0};  // same queries through an ordered-tree block index
};

struct LookupBenchReport {
  std::vector<LookupBenchRow> rows;
  std::size_t lookups{0};
  std::size_t working_set{0};

  /// Hash latency at the largest size over latency at the smallest.
  double hash_ratio() const { return rows.empty() ? 0.0 : rows.back().hash_ns / rows.front().hash_ns; }
  double tree_ratio() const { return rows.empty() ? 0.0 : rows.back().tree_ns / rows.front().tree_ns; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["lookups"] = lookups;
    j["working_set_blocks"] = working_set;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) j["rows"].push_back({{"blocks", r.blocks}, {"hash_ns", r.hash_ns}, {"tree_ns", r.tree_ns}});
    j["hash_ratio"] = hash_ratio();
    j["tree_ratio"] = tree_ratio();
    return j;
  }
};

namespace detail {

template <typename Fn>
double best_ns_per_op(std::size_t ops, int reps, Fn&& fn) {
  double best = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double ns = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0).count();
    if (r == 0 || ns < best) best = ns;
  }
  return best / static_cast<double>(ops);
}

}  // namespace detail

/// Voxel lookup latency against table size. Queries come from a fixed set of
/// `working_set` blocks so only the table size changes between rows.
inline LookupBenchReport bench_voxel_lookup(const std::vector<std::size_t>& sizes, std::size_t lookups = 1'000'000,
                                            std::size_t working_set = 1000, std::uint64_t seed = 1, int reps = 3) {
  if (sizes.empty()) throw std::invalid_argument("bench: no map sizes");
  for (std::size_t s : sizes)
    if (s < working_set) throw std::invalid_argument("bench: map size below working set");
  LookupBenchReport report;
  report.lookups = lookups;
  report.working_set = working_set;
  VoxelMap::Config cfg;
  cfg.block_side = 4;
  for (std::size_t n : sizes) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int32_t> coord(-4096, 4095);
    VoxelMap map(cfg);
    std::map<BlockIndex, int> tree;
    std::vector<BlockIndex> keys;
    keys.reserve(n);
    while (keys.size() < n) {
      const BlockIndex b{coord(rng), coord(rng), coord(rng)};
      if (tree.emplace(b, static_cast<int>(keys.size())).second) {
        map.allocate_block(b);
        keys.push_back(b);
      }
    }
    std::vector<BlockIndex> hot(working_set);
    for (auto& h : hot) h = keys[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
    std::uniform_int_distribution<std::size_t> pick(0, working_set - 1);
    std::uniform_int_distribution<int> local(0, cfg.block_side - 1);
    std::vector<VoxelIndex> queries(lookups);
    std::vector<BlockIndex> block_queries(lookups);
    for (std::size_t q = 0; q < lookups; ++q) {
      const BlockIndex& b = hot[pick(rng)];
      block_queries[q] = b;
      queries[q] = {static_cast<std::int64_t>(b.i) * cfg.block_side + local(rng),
                    static_cast<std::int64_t>(b.j) * cfg.block_side + local(rng),
                    static_cast<std::int64_t>(b.k) * cfg.block_side + local(rng)};
    }
    std::size_t sink = 0;
    LookupBenchRow row;
    row.blocks = n;
    row.hash_ns = detail::best_ns_per_op(lookups, reps, [&] {
      for (const auto& v : queries) sink += map.find(v) != nullptr;
    });
    row.tree_ns = detail::best_ns_per_op(lookups, reps, [&] {
      for (const auto& b : block_queries) sink += static_cast<std::size_t>(tree.find(b)->second & 1);
    });
    if (sink == 0) throw std::logic_error("bench: lookups found nothing");
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace travex
