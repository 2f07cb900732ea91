#pragma once

#include "travex/voxel_map.hpp"

namespace travex::testing {

inline void set_state(VoxelMap& m, const VoxelIndex& vi, VoxelState s) {
  Voxel& v = m.touch(vi);
  if (s == VoxelState::Unknown) {
    v = Voxel{};
    return;
  }
  v.weight = 1.0;
  v.distance = s == VoxelState::Free ? m.config().truncation : 0.0;
}

/// Sets every voxel with index in [lo, hi] (inclusive) to `s`.
inline void fill_box(VoxelMap& m, const VoxelIndex& lo, const VoxelIndex& hi, VoxelState s) {
  for (auto k = lo.k; k <= hi.k; ++k)
    for (auto j = lo.j; j <= hi.j; ++j)
      for (auto i = lo.i; i <= hi.i; ++i) set_state(m, {i, j, k}, s);
}

}  // namespace travex::testing
