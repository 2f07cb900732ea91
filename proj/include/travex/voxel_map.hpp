#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "travex/geometry.hpp"
#include "travex/semantic.hpp"

namespace travex {

enum class VoxelState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

inline const char* to_string(VoxelState s) {
  switch (s) {
    case VoxelState::Unknown: return "unknown";
    case VoxelState::Free: return "free";
    case VoxelState::Occupied: return "occupied";
  }
  return "?";
}

// Kept in double precision in memory; snapshots store f32.
struct Voxel {
  double distance{0.0};
  double weight{0.0};
  double trav{0.0};
  double trav_weight{0.0};
};

struct VoxelIndex {
  std::int64_t i{0};
  std::int64_t j{0};
  std::int64_t k{0};
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  friend auto operator<=>(const VoxelIndex&, const VoxelIndex&) = default;
};

struct BlockIndex {
  std::int32_t i{0};
  std::int32_t j{0};
  std::int32_t k{0};
  friend bool operator==(const BlockIndex&, const BlockIndex&) = default;
  friend auto operator<=>(const BlockIndex&, const BlockIndex&) = default;
};

struct IndexHash {
  static std::size_t mix(std::uint64_t h) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return static_cast<std::size_t>(h);
  }
  std::size_t operator()(const BlockIndex& b) const {
    return mix((static_cast<std::uint64_t>(static_cast<std::uint32_t>(b.i)) * 73856093ULL) ^
               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b.j)) * 19349669ULL) ^
               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b.k)) * 83492791ULL));
  }
  std::size_t operator()(const VoxelIndex& v) const {
    return mix((static_cast<std::uint64_t>(v.i) * 73856093ULL) ^ (static_cast<std::uint64_t>(v.j) * 19349669ULL) ^
               (static_cast<std::uint64_t>(v.k) * 83492791ULL));
  }
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct VoxelBlock {
  BlockIndex index;
  std::vector<Voxel> voxels;
};

struct VoxelCounts {
  std::size_t unknown{0};
  std::size_t free{0};
  std::size_t occupied{0};
  std::size_t total() const { return unknown + free + occupied; }
  friend bool operator==(const VoxelCounts&, const VoxelCounts&) = default;
};

struct SensorFrustum {
  RobotState apex;
  double hfov{kPi / 2.0};
  double vfov{kPi / 3.0};
  double range{3.0};

  void validate() const {
    if (!(hfov > 0.0 && hfov < 2.0 * kPi) || !(vfov > 0.0 && vfov < 2.0 * kPi))
      throw std::invalid_argument("SensorFrustum: field of view must lie in (0, 2pi)");
    if (!(range > 0.0)) throw std::invalid_argument("SensorFrustum: range must be positive");
  }
};

struct RayHit {
  VoxelIndex voxel;
  Point3 center;
  VoxelState state{VoxelState::Unknown};
  std::optional<double> trav;
  double distance{0.0};  // ray parameter at which the voxel is entered
};

struct GainWeights {
  double unknown{1.0};
  double free{0.1};
  double occupied{1.0};
};

/// log((w_u e^u + w_f e^f) / (w_o e^o)) over counts normalized by their total.
inline double volumetric_gain(const VoxelCounts& counts, const GainWeights& w) {
  const double total = static_cast<double>(counts.total());
  if (total == 0.0) return 0.0;
  if (!(w.occupied > 0.0)) throw std::invalid_argument("volumetric_gain: occupied weight must be positive");
  const double u = counts.unknown / total;
  const double f = counts.free / total;
  const double o = counts.occupied / total;
  return std::log((w.unknown * std::exp(u) + w.free * std::exp(f)) / (w.occupied * std::exp(o)));
}

/// Sparse TSDF map: fixed-size voxel blocks looked up through a hash table.
class VoxelMap {
 public:
  struct Config {
    double voxel_size{0.1};
    int block_side{16};
    double truncation{0.3};
    double occupancy_threshold{0.0};  // <= 0 selects voxel_size
  };

  VoxelMap() : VoxelMap(Config{}) {}
  explicit VoxelMap(const Config& cfg) : cfg_(cfg) {
    if (!(cfg_.voxel_size > 0.0)) throw std::invalid_argument("VoxelMap: voxel size must be positive");
    if (cfg_.block_side <= 0 || cfg_.block_side > 64) throw std::invalid_argument("VoxelMap: bad block side");
    if (cfg_.occupancy_threshold <= 0.0) cfg_.occupancy_threshold = cfg_.voxel_size;
    if (cfg_.truncation < cfg_.voxel_size) throw std::invalid_argument("VoxelMap: truncation must be >= voxel size");
    voxels_per_block_ = static_cast<std::size_t>(cfg_.block_side) * cfg_.block_side * cfg_.block_side;
  }

  const Config& config() const { return cfg_; }
  double voxel_size() const { return cfg_.voxel_size; }
  int block_side() const { return cfg_.block_side; }
  std::size_t block_count() const { return blocks_.size(); }

  VoxelIndex voxel_index(const Point3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x / cfg_.voxel_size)),
            static_cast<std::int64_t>(std::floor(p.y / cfg_.voxel_size)),
            static_cast<std::int64_t>(std::floor(p.z / cfg_.voxel_size))};
  }

  Point3 voxel_center(const VoxelIndex& v) const {
    return {(v.i + 0.5) * cfg_.voxel_size, (v.j + 0.5) * cfg_.voxel_size, (v.k + 0.5) * cfg_.voxel_size};
  }

  BlockIndex block_of(const VoxelIndex& v) const {
    const std::int64_t b = cfg_.block_side;
    return {static_cast<std::int32_t>(floor_div(v.i, b)), static_cast<std::int32_t>(floor_div(v.j, b)),
            static_cast<std::int32_t>(floor_div(v.k, b))};
  }

  std::size_t local_offset(const VoxelIndex& v, const BlockIndex& b) const {
    const std::int64_t s = cfg_.block_side;
    const auto li = v.i - b.i * s;
    const auto lj = v.j - b.j * s;
    const auto lk = v.k - b.k * s;
    return static_cast<std::size_t>((lk * s + lj) * s + li);
  }

  /// Never allocates; nullptr for voxels in untouched blocks.
  const Voxel* find(const VoxelIndex& v) const {
    const BlockIndex b = block_of(v);
    const auto it = blocks_.find(b);
    if (it == blocks_.end()) return nullptr;
    return &it->second.voxels[local_offset(v, b)];
  }

  Voxel& touch(const VoxelIndex& v) {
    const BlockIndex b = block_of(v);
    auto it = blocks_.find(b);
    if (it == blocks_.end()) {
      it = blocks_.emplace(b, VoxelBlock{b, std::vector<Voxel>(voxels_per_block_)}).first;
    }
    return it->second.voxels[local_offset(v, b)];
  }

  /// Allocates an empty block (all voxels unknown).
  void allocate_block(const BlockIndex& b) {
    if (blocks_.find(b) == blocks_.end()) blocks_.emplace(b, VoxelBlock{b, std::vector<Voxel>(voxels_per_block_)});
  }

  VoxelState classify(const Voxel* vox) const {
    if (vox == nullptr || vox->weight <= 0.0) return VoxelState::Unknown;
    return vox->distance < cfg_.occupancy_threshold ? VoxelState::Occupied : VoxelState::Free;
  }

  VoxelState state(const VoxelIndex& v) const { return classify(find(v)); }
  VoxelState voxel_state(const Point3& p) const { return state(voxel_index(p)); }

  /// Projective TSDF integration of one labeled scan taken from `origin`.
  void integrate_labeled_cloud(std::span<const LabeledPoint> cloud, const Point3& origin) {
    if (cloud.empty()) return;
    const double delta = cfg_.truncation;
    std::unordered_set<VoxelIndex, IndexHash> endpoints;
    endpoints.reserve(cloud.size());
    // Surface evidence first: endpoint voxel gets its own ray's signed distance.
    for (const auto& lp : cloud) {
      const Point3 d = lp.position - origin;
      const double range = d.norm();
      if (!(range > 0.0)) continue;
      const Point3 dir = (1.0 / range) * d;
      const VoxelIndex vi = voxel_index(lp.position);
      endpoints.insert(vi);
      Voxel& v = touch(vi);
      const double sdf = std::clamp(range - (voxel_center(vi) - origin).dot(dir), -delta, delta);
      merge_distance(v, sdf);
      const double ts = std::clamp(lp.traversability, 0.0, 1.0);
      v.trav = (v.trav * v.trav_weight + ts) / (v.trav_weight + 1.0);
      v.trav_weight += 1.0;
    }
    // Free space and truncation band along each ray, leaving surface voxels alone.
    for (const auto& lp : cloud) {
      const Point3 d = lp.position - origin;
      const double range = d.norm();
      if (!(range > 0.0)) continue;
      const Point3 dir = (1.0 / range) * d;
      traverse(origin, dir, range + delta, [&](const VoxelIndex& vi, double) {
        if (endpoints.count(vi) != 0) return true;
        const double sdf = range - (voxel_center(vi) - origin).dot(dir);
        if (sdf < -delta) return true;
        Voxel& v = touch(vi);
        if (v.trav_weight > 0.0) return true;
        merge_distance(v, std::min(sdf, delta));
        return true;
      });
    }
  }

  /// Axis-aligned box around all observed voxel centres.
  std::optional<std::pair<Point3, Point3>> observed_bounds() const {
    std::optional<std::pair<Point3, Point3>> out;
    for_each_voxel([&](const VoxelIndex& vi, const Voxel& v) {
      if (v.weight <= 0.0) return;
      const Point3 c = voxel_center(vi);
      if (!out) {
        out.emplace(c, c);
        return;
      }
      out->first = {std::min(out->first.x, c.x), std::min(out->first.y, c.y), std::min(out->first.z, c.z)};
      out->second = {std::max(out->second.x, c.x), std::max(out->second.y, c.y), std::max(out->second.z, c.z)};
    });
    return out;
  }

  /// Marks unknown voxels whose centres lie in the box as free; used for the
  /// space a robot body occupies, which its own sensor cannot see.
  std::size_t mark_free_box(const Point3& lo, const Point3& hi) {
    std::size_t n = 0;
    const VoxelIndex a = voxel_index(lo);
    const VoxelIndex b = voxel_index(hi);
    for (auto k = a.k; k <= b.k; ++k)
      for (auto j = a.j; j <= b.j; ++j)
        for (auto i = a.i; i <= b.i; ++i) {
          const Point3 c = voxel_center({i, j, k});
          if (c.x < lo.x || c.y < lo.y || c.z < lo.z || c.x > hi.x || c.y > hi.y || c.z > hi.z) continue;
          Voxel& v = touch({i, j, k});
          if (v.weight > 0.0) continue;
          merge_distance(v, cfg_.truncation);
          ++n;
        }
    return n;
  }

  /// Exact voxel traversal; returns the first voxel that is not free.
  std::optional<RayHit> raycast(const Point3& origin, const Point3& direction, double max_range) const {
    if (std::abs(direction.norm() - 1.0) > 1e-9) throw std::invalid_argument("raycast: direction must be unit length");
    std::optional<RayHit> hit;
    BlockCache cache;
    traverse(origin, direction, max_range, [&](const VoxelIndex& vi, double t_enter) {
      const Voxel* vox = cached_find(vi, cache);
      const VoxelState s = classify(vox);
      if (s == VoxelState::Free) return true;
      RayHit h;
      h.voxel = vi;
      h.center = voxel_center(vi);
      h.state = s;
      h.distance = std::max(0.0, t_enter);
      if (s == VoxelState::Occupied && vox->trav_weight > 0.0) h.trav = vox->trav;
      hit = h;
      return false;
    });
    return hit;
  }

  /// True when an occupied voxel other than the endpoints' own lies on the
  /// segment strictly before the voxel containing `to`.
  bool occluded(const Point3& from, const Point3& to) const {
    const Point3 d = to - from;
    const double len = d.norm();
    if (!(len > 0.0)) return false;
    const Point3 dir = (1.0 / len) * d;
    const VoxelIndex start = voxel_index(from);
    const VoxelIndex target = voxel_index(to);
    bool blocked = false;
    BlockCache cache;
    traverse(from, dir, len, [&](const VoxelIndex& vi, double) {
      if (vi == target) return false;
      if (vi == start) return true;
      if (classify(cached_find(vi, cache)) == VoxelState::Occupied) {
        blocked = true;
        return false;
      }
      return true;
    });
    return blocked;
  }

  /// Mean semantic traversability of surface voxels under the polygon within
  /// a vertical band.
  std::optional<double> avg_semantic_traversability(const FootprintPolygon& poly, double z_center,
                                                    double z_halfspan) const {
    if (!(z_halfspan > 0.0)) throw std::invalid_argument("avg_semantic_traversability: z_halfspan must be positive");
    double min_x, min_y, max_x, max_y;
    poly.bounds(min_x, min_y, max_x, max_y);
    const double vs = cfg_.voxel_size;
    const auto i0 = static_cast<std::int64_t>(std::floor(min_x / vs - 0.5));
    const auto i1 = static_cast<std::int64_t>(std::ceil(max_x / vs - 0.5));
    const auto j0 = static_cast<std::int64_t>(std::floor(min_y / vs - 0.5));
    const auto j1 = static_cast<std::int64_t>(std::ceil(max_y / vs - 0.5));
    const auto k0 = static_cast<std::int64_t>(std::floor((z_center - z_halfspan) / vs - 0.5));
    const auto k1 = static_cast<std::int64_t>(std::ceil((z_center + z_halfspan) / vs - 0.5));
    double sum = 0.0;
    std::size_t n = 0;
    BlockCache cache;
    for (auto k = k0; k <= k1; ++k) {
      const double cz = (k + 0.5) * vs;
      if (cz < z_center - z_halfspan || cz > z_center + z_halfspan) continue;
      for (auto j = j0; j <= j1; ++j)
        for (auto i = i0; i <= i1; ++i) {
          if (!poly.contains((i + 0.5) * vs, (j + 0.5) * vs)) continue;
          const Voxel* vox = cached_find({i, j, k}, cache);
          if (classify(vox) != VoxelState::Occupied || vox->trav_weight <= 0.0) continue;
          sum += vox->trav;
          ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  /// Classifies every visible voxel centre inside the yaw-aligned frustum.
  VoxelCounts frustum_census(const SensorFrustum& f) const {
    f.validate();
    VoxelCounts counts;
    const double vs = cfg_.voxel_size;
    if (f.range < vs) return counts;
    const Point3 apex = f.apex.position();
    const double c = std::cos(f.apex.psi);
    const double s = std::sin(f.apex.psi);
    const double cos_h = std::cos(std::min(f.hfov / 2.0, kPi));
    const double half_v = std::min(f.vfov / 2.0, kPi / 2.0);
    const double cos_v = std::cos(half_v);
    const double z_extent = f.range * std::sin(half_v);
    const VoxelIndex lo = voxel_index({apex.x - f.range, apex.y - f.range, apex.z - z_extent});
    const VoxelIndex hi = voxel_index({apex.x + f.range, apex.y + f.range, apex.z + z_extent});
    const double r2 = f.range * f.range;
    BlockCache cache;
    for (auto k = lo.k; k <= hi.k; ++k)
      for (auto j = lo.j; j <= hi.j; ++j)
        for (auto i = lo.i; i <= hi.i; ++i) {
          const Point3 ctr{(i + 0.5) * vs, (j + 0.5) * vs, (k + 0.5) * vs};
          const Point3 d = ctr - apex;
          const double dist2 = d.dot(d);
          if (dist2 > r2) continue;
          const double lx = c * d.x + s * d.y;
          const double ly = -s * d.x + c * d.y;
          const double rho_xy = std::sqrt(lx * lx + ly * ly);
          if (lx < rho_xy * cos_h - 1e-12) continue;
          if (rho_xy < std::sqrt(dist2) * cos_v - 1e-12) continue;
          if (occluded(apex, ctr)) continue;
          switch (classify(cached_find({i, j, k}, cache))) {
            case VoxelState::Unknown: ++counts.unknown; break;
            case VoxelState::Free: ++counts.free; break;
            case VoxelState::Occupied: ++counts.occupied; break;
          }
        }
    return counts;
  }

  /// Visits every allocated voxel in deterministic (sorted block) order.
  template <typename Fn>
  void for_each_voxel(Fn&& fn) const {
    const std::int64_t s = cfg_.block_side;
    for (const BlockIndex& b : sorted_block_indices()) {
      const auto& blk = blocks_.at(b);
      for (std::int64_t lk = 0; lk < s; ++lk)
        for (std::int64_t lj = 0; lj < s; ++lj)
          for (std::int64_t li = 0; li < s; ++li) {
            const VoxelIndex vi{b.i * s + li, b.j * s + lj, b.k * s + lk};
            fn(vi, blk.voxels[static_cast<std::size_t>((lk * s + lj) * s + li)]);
          }
    }
  }

  VoxelCounts count_states() const {
    VoxelCounts c;
    for_each_voxel([&](const VoxelIndex&, const Voxel& v) {
      switch (classify(&v)) {
        case VoxelState::Unknown: ++c.unknown; break;
        case VoxelState::Free: ++c.free; break;
        case VoxelState::Occupied: ++c.occupied; break;
      }
    });
    return c;
  }

  std::vector<BlockIndex> sorted_block_indices() const {
    std::vector<BlockIndex> out;
    out.reserve(blocks_.size());
    for (const auto& [b, _] : blocks_) out.push_back(b);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Amanatides-Woo traversal over [0, max_t]. `fn(voxel, t_enter)` returns
  /// false to stop.
  template <typename Fn>
  void traverse(const Point3& origin, const Point3& dir, double max_t, Fn&& fn) const {
    const double vs = cfg_.voxel_size;
    VoxelIndex cur = voxel_index(origin);
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    std::int64_t* idx[3] = {&cur.i, &cur.j, &cur.k};
    int step[3];
    double t_max[3];
    double t_delta[3];
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (d[a] > 0.0) {
        step[a] = 1;
        t_max[a] = ((*idx[a] + 1) * vs - o[a]) / d[a];
        t_delta[a] = vs / d[a];
      } else if (d[a] < 0.0) {
        step[a] = -1;
        t_max[a] = (*idx[a] * vs - o[a]) / d[a];
        t_delta[a] = -vs / d[a];
      } else {
        step[a] = 0;
        t_max[a] = inf;
        t_delta[a] = inf;
      }
    }
    double t = 0.0;
    while (t <= max_t) {
      if (!fn(cur, t)) return;
      int a = 0;
      if (t_max[1] < t_max[a]) a = 1;
      if (t_max[2] < t_max[a]) a = 2;
      if (t_max[a] == inf) return;
      t = t_max[a];
      *idx[a] += step[a];
      t_max[a] += t_delta[a];
    }
  }

  // Snapshot: "TVOX", u32 version, f64 voxel size, u32 block side, u64 block
  // count, then per block i32 x3 index and B^3 records of four f32.
  static constexpr std::uint32_t kSnapshotVersion = 1;

  void save(std::ostream& os) const {
    os.write("TVOX", 4);
    put_le<std::uint32_t>(os, kSnapshotVersion);
    put_le<double>(os, cfg_.voxel_size);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.block_side));
    put_le<std::uint64_t>(os, static_cast<std::uint64_t>(blocks_.size()));
    for (const BlockIndex& b : sorted_block_indices()) {
      put_le<std::int32_t>(os, b.i);
      put_le<std::int32_t>(os, b.j);
      put_le<std::int32_t>(os, b.k);
      for (const Voxel& v : blocks_.at(b).voxels) {
        put_le<float>(os, static_cast<float>(v.distance));
        put_le<float>(os, static_cast<float>(v.weight));
        put_le<float>(os, static_cast<float>(v.trav));
        put_le<float>(os, static_cast<float>(v.trav_weight));
      }
    }
  }

  static VoxelMap load(std::istream& is, double truncation = 0.0) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TVOX", 4) != 0) throw std::runtime_error("TVOX: bad magic");
    if (get_le<std::uint32_t>(is) != kSnapshotVersion) throw std::runtime_error("TVOX: unsupported version");
    Config cfg;
    cfg.voxel_size = get_le<double>(is);
    cfg.block_side = static_cast<int>(get_le<std::uint32_t>(is));
    cfg.truncation = truncation > 0.0 ? truncation : std::max(cfg.truncation, cfg.voxel_size);
    if (!(cfg.voxel_size > 0.0) || cfg.block_side <= 0 || cfg.block_side > 64) throw std::runtime_error("TVOX: bad header");
    VoxelMap map(cfg);
    const auto n = get_le<std::uint64_t>(is);
    for (std::uint64_t b = 0; b < n; ++b) {
      BlockIndex bi;
      bi.i = get_le<std::int32_t>(is);
      bi.j = get_le<std::int32_t>(is);
      bi.k = get_le<std::int32_t>(is);
      VoxelBlock blk{bi, std::vector<Voxel>(map.voxels_per_block_)};
      for (Voxel& v : blk.voxels) {
        v.distance = get_le<float>(is);
        v.weight = get_le<float>(is);
        v.trav = get_le<float>(is);
        v.trav_weight = get_le<float>(is);
      }
      map.blocks_.emplace(bi, std::move(blk));
    }
    return map;
  }

 private:
  struct BlockCache {
    BlockIndex index{std::numeric_limits<std::int32_t>::min(), 0, 0};
    const VoxelBlock* block{nullptr};
    bool valid{false};
  };

  const Voxel* cached_find(const VoxelIndex& v, BlockCache& cache) const {
    const BlockIndex b = block_of(v);
    if (!cache.valid || !(cache.index == b)) {
      const auto it = blocks_.find(b);
      cache.index = b;
      cache.block = it == blocks_.end() ? nullptr : &it->second;
      cache.valid = true;
    }
    if (cache.block == nullptr) return nullptr;
    return &cache.block->voxels[local_offset(v, b)];
  }

  static void merge_distance(Voxel& v, double sdf) {
    v.distance = (v.distance * v.weight + sdf) / (v.weight + 1.0);
    v.weight += 1.0;
  }

  template <typename T>
  static void put_le(std::ostream& os, T value) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
  }

  template <typename T>
  static T get_le(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("TVOX: truncated file");
    T value;
    std::memcpy(&value, b, sizeof(T));
    return value;
  }

  Config cfg_;
  std::size_t voxels_per_block_{0};
  std::unordered_map<BlockIndex, VoxelBlock, IndexHash> blocks_;
};

}  // namespace travex
