#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <utility>

#include "json.hpp"
#include "travex/voxel_map.hpp"

namespace travex {

/// Voxels in index order (k, j, i), skipping never-observed ones.
inline std::vector<std::pair<VoxelIndex, Voxel>> observed_voxels(const VoxelMap& map) {
  std::vector<std::pair<VoxelIndex, Voxel>> out;
  map.for_each_voxel([&](const VoxelIndex& vi, const Voxel& v) {
    if (v.weight > 0.0) out.emplace_back(vi, v);
  });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.k, a.first.j, a.first.i) < std::tie(b.first.k, b.first.j, b.first.i);
  });
  return out;
}

inline void write_map_csv(const VoxelMap& map, std::ostream& os) {
  os << "i,j,k,x,y,z,state,distance,weight,trav\n";
  char buf[256];
  for (const auto& [vi, v] : observed_voxels(map)) {
    const Point3 c = map.voxel_center(vi);
    const VoxelState s = map.classify(&v);
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%lld,%.4f,%.4f,%.4f,%s,%.6g,%.6g,", static_cast<long long>(vi.i),
                  static_cast<long long>(vi.j), static_cast<long long>(vi.k), c.x, c.y, c.z, to_string(s), v.distance,
                  v.weight);
    os << buf;
    if (v.trav_weight > 0.0) {
      std::snprintf(buf, sizeof(buf), "%.6g", v.trav);
      os << buf;
    }
    os << '\n';
  }
}

/// Top-down P5 image: occupied anywhere in the column 0, free 255, unknown 128.
inline void write_map_pgm(const VoxelMap& map, std::ostream& os) {
  const auto vox = observed_voxels(map);
  if (vox.empty()) {
    os << "P5\n1 1\n255\n" << static_cast<char>(128);
    return;
  }
  std::int64_t i0 = vox.front().first.i, i1 = i0, j0 = vox.front().first.j, j1 = j0;
  std::map<std::pair<std::int64_t, std::int64_t>, VoxelState> column;
  for (const auto& [vi, v] : vox) {
    i0 = std::min(i0, vi.i);
    i1 = std::max(i1, vi.i);
    j0 = std::min(j0, vi.j);
    j1 = std::max(j1, vi.j);
    auto& s = column[{vi.i, vi.j}];
    const VoxelState c = map.classify(&v);
    if (c == VoxelState::Occupied || s == VoxelState::Unknown) s = c;
  }
  const auto w = i1 - i0 + 1;
  const auto h = j1 - j0 + 1;
  os << "P5\n" << w << ' ' << h << "\n255\n";
  // Image row 0 is the largest y so north is up.
  for (std::int64_t j = j1; j >= j0; --j)
    for (std::int64_t i = i0; i <= i1; ++i) {
      const auto it = column.find({i, j});
      std::uint8_t px = 128;
      if (it != column.end()) px = it->second == VoxelState::Occupied ? 0 : it->second == VoxelState::Free ? 255 : 128;
      os.put(static_cast<char>(px));
    }
}

inline nlohmann::json map_json(const VoxelMap& map) {
  nlohmann::json j;
  j["voxel_size"] = map.voxel_size();
  j["block_side"] = map.block_side();
  j["blocks"] = map.block_count();
  std::size_t counts[3] = {0, 0, 0};
  nlohmann::json occupied = nlohmann::json::array();
  for (const auto& [vi, v] : observed_voxels(map)) {
    const VoxelState s = map.classify(&v);
    ++counts[static_cast<int>(s)];
    if (s != VoxelState::Occupied) continue;
    nlohmann::json o = {vi.i, vi.j, vi.k};
    o.push_back(v.trav_weight > 0.0 ? nlohmann::json(v.trav) : nlohmann::json(nullptr));
    occupied.push_back(std::move(o));
  }
  j["free"] = counts[static_cast<int>(VoxelState::Free)];
  j["occupied"] = counts[static_cast<int>(VoxelState::Occupied)];
  j["occupied_voxels"] = std::move(occupied);
  return j;
}

}  // namespace travex
