#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "travex/geometry.hpp"

namespace travex {

struct GeometricRiskParams {
  double w_slope{0.4};
  double w_roughness{0.3};
  double w_step{0.3};
  double slope_crit{0.45};      // rad
  double roughness_crit{0.10};  // m
  double step_crit{0.25};       // m

  void validate() const {
    if (w_slope < 0 || w_roughness < 0 || w_step < 0) throw std::invalid_argument("GeometricRiskParams: negative weight");
    if (std::abs(w_slope + w_roughness + w_step - 1.0) > 1e-9)
      throw std::invalid_argument("GeometricRiskParams: weights must sum to 1");
    if (!(slope_crit > 0) || !(roughness_crit > 0) || !(step_crit > 0))
      throw std::invalid_argument("GeometricRiskParams: critical values must be positive");
  }
};

/// Weighted normalized risk, clamped to [0, 1].
inline double terrain_risk(double slope, double roughness, double step, const GeometricRiskParams& p) {
  const double r = p.w_slope * slope / p.slope_crit + p.w_roughness * roughness / p.roughness_crit +
                   p.w_step * step / p.step_crit;
  return std::clamp(r, 0.0, 1.0);
}

/// 1 - risk, with the critical values acting as hard zeroing constraints.
inline double geometric_traversability(double slope, double roughness, double step, const GeometricRiskParams& p) {
  if (slope >= p.slope_crit || roughness >= p.roughness_crit || step >= p.step_crit) return 0.0;
  return 1.0 - terrain_risk(slope, roughness, step, p);
}

struct GridCell {
  std::optional<double> elevation;
  std::optional<double> slope;
  std::optional<double> roughness;
  std::optional<double> step;
  std::optional<double> risk;
  std::optional<double> trav_g;
};

struct CellIndex {
  int i{0};
  int j{0};
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Robot-centric 2.5D grid. Cell (i, j) spans
/// [origin_x + i*res, origin_x + (i+1)*res) x [origin_y + j*res, ...).
class TraversabilityGrid {
 public:
  struct Config {
    double resolution{0.05};
    double window{10.0};
    double elevation_percentile{0.9};
    // Points higher than this above the robot are ignored (overhangs, ceiling).
    double max_height_above_robot{std::numeric_limits<double>::infinity()};
  };

  TraversabilityGrid() : TraversabilityGrid(Config{}) {}
  explicit TraversabilityGrid(const Config& cfg) : cfg_(cfg) {
    if (!(cfg.resolution > 0.0)) throw std::invalid_argument("TraversabilityGrid: resolution must be positive");
    size_ = std::max(1, static_cast<int>(std::lround(cfg.window / cfg.resolution)));
    cells_.assign(static_cast<std::size_t>(size_) * size_, GridCell{});
  }

  /// Fixed-origin grid, mostly for tests and offline analysis.
  TraversabilityGrid(double origin_x, double origin_y, double resolution, int width, int height)
      : origin_x_(origin_x), origin_y_(origin_y), width_override_(width), height_override_(height) {
    if (!(resolution > 0.0) || width <= 0 || height <= 0) throw std::invalid_argument("TraversabilityGrid: bad geometry");
    cfg_.resolution = resolution;
    cfg_.window = resolution * std::max(width, height);
    size_ = 0;
    cells_.assign(static_cast<std::size_t>(width) * height, GridCell{});
  }

  const Config& config() const { return cfg_; }
  double resolution() const { return cfg_.resolution; }
  int width() const { return width_override_ > 0 ? width_override_ : size_; }
  int height() const { return height_override_ > 0 ? height_override_ : size_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }

  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width() && j < height(); }
  GridCell& at(int i, int j) { return cells_[static_cast<std::size_t>(j) * width() + i]; }
  const GridCell& at(int i, int j) const { return cells_[static_cast<std::size_t>(j) * width() + i]; }

  Point2 cell_center(int i, int j) const {
    return {origin_x_ + (i + 0.5) * cfg_.resolution, origin_y_ + (j + 0.5) * cfg_.resolution};
  }

  std::optional<CellIndex> cell_of(double x, double y) const {
    const int i = static_cast<int>(std::floor((x - origin_x_) / cfg_.resolution));
    const int j = static_cast<int>(std::floor((y - origin_y_) / cfg_.resolution));
    if (!in_bounds(i, j)) return std::nullopt;
    return CellIndex{i, j};
  }

  std::optional<double> elevation_at(double x, double y) const {
    const auto c = cell_of(x, y);
    if (!c) return std::nullopt;
    return at(c->i, c->j).elevation;
  }

  const GridCell* cell_at(double x, double y) const {
    const auto c = cell_of(x, y);
    return c ? &at(c->i, c->j) : nullptr;
  }

  /// Moves the window so the robot sits in the middle cell. The origin snaps
  /// to multiples of the resolution so surviving cells keep their values.
  void recenter(double x, double y) {
    if (width_override_ > 0) return;
    const double res = cfg_.resolution;
    const double half = 0.5 * size_ * res;
    const double new_ox = std::floor((x - half) / res) * res;
    const double new_oy = std::floor((y - half) / res) * res;
    const long di = std::lround((new_ox - origin_x_) / res);
    const long dj = std::lround((new_oy - origin_y_) / res);
    if (initialized_ && di == 0 && dj == 0) return;
    std::vector<GridCell> next(cells_.size());
    if (initialized_) {
      for (int j = 0; j < size_; ++j)
        for (int i = 0; i < size_; ++i) {
          const long oi = i + di;
          const long oj = j + dj;
          if (oi >= 0 && oj >= 0 && oi < size_ && oj < size_)
            next[static_cast<std::size_t>(j) * size_ + i] = cells_[static_cast<std::size_t>(oj) * size_ + oi];
        }
    }
    cells_ = std::move(next);
    origin_x_ = new_ox;
    origin_y_ = new_oy;
    initialized_ = true;
  }

  /// Per-scan percentile elevation for every hit cell (last write wins).
  void integrate_scan(std::span<const Point3> cloud, const RobotState& robot) {
    if (cloud.empty()) return;
    recenter(robot.x, robot.y);
    std::vector<std::vector<double>> buckets(cells_.size());
    const double z_max = robot.z + cfg_.max_height_above_robot;
    for (const auto& p : cloud) {
      if (p.z > z_max) continue;
      const auto c = cell_of(p.x, p.y);
      if (!c) continue;
      buckets[static_cast<std::size_t>(c->j) * width() + c->i].push_back(p.z);
    }
    for (std::size_t k = 0; k < buckets.size(); ++k) {
      if (buckets[k].empty()) continue;
      GridCell fresh;
      fresh.elevation = percentile(std::move(buckets[k]), cfg_.elevation_percentile);
      cells_[k] = fresh;
    }
  }

  /// Plane-fit slope, residual roughness and max neighbour step per cell.
  void compute_features() {
    const double res = cfg_.resolution;
    for (int j = 0; j < height(); ++j)
      for (int i = 0; i < width(); ++i) {
        auto& cell = at(i, j);
        cell.slope.reset();
        cell.roughness.reset();
        cell.step.reset();
        cell.risk.reset();
        cell.trav_g.reset();
        if (!cell.elevation) continue;
        const double e0 = *cell.elevation;
        // Normal equations for z = a*dx + b*dy + c over the 3x3 window.
        double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, n = 0, sxz = 0, syz = 0, sz = 0;
        double step = 0.0;
        int neighbors = 0;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ni = i + di;
            const int nj = j + dj;
            if (!in_bounds(ni, nj)) continue;
            const auto& e = at(ni, nj).elevation;
            if (!e) continue;
            const double dx = di * res;
            const double dy = dj * res;
            const double z = *e - e0;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
            sx += dx;
            sy += dy;
            n += 1;
            sxz += dx * z;
            syz += dy * z;
            sz += z;
            if (di != 0 || dj != 0) {
              ++neighbors;
              step = std::max(step, std::abs(z));
            }
          }
        if (neighbors < 3) continue;
        double a = 0, b = 0, c = 0;
        if (!solve3({{{sxx, sxy, sx}, {sxy, syy, sy}, {sx, sy, n}}}, {sxz, syz, sz}, a, b, c)) continue;
        const double nz = 1.0 / std::sqrt(1.0 + a * a + b * b);
        double ss = 0.0;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ni = i + di;
            const int nj = j + dj;
            if (!in_bounds(ni, nj) || !at(ni, nj).elevation) continue;
            const double r = (*at(ni, nj).elevation - e0) - (a * di * res + b * dj * res + c);
            ss += r * r;
          }
        cell.slope = std::acos(std::clamp(nz, -1.0, 1.0));
        cell.roughness = std::sqrt(ss / n);
        cell.step = step;
      }
  }

  void apply_risk(const GeometricRiskParams& params) {
    params.validate();
    for (auto& cell : cells_) {
      if (!cell.slope) continue;
      cell.risk = terrain_risk(*cell.slope, *cell.roughness, *cell.step, params);
      cell.trav_g = geometric_traversability(*cell.slope, *cell.roughness, *cell.step, params);
    }
  }

  /// Cells whose centre lies inside or on the polygon.
  std::vector<CellIndex> cells_in_polygon(const FootprintPolygon& poly) const {
    double min_x, min_y, max_x, max_y;
    poly.bounds(min_x, min_y, max_x, max_y);
    const double res = cfg_.resolution;
    const int i0 = std::max(0, static_cast<int>(std::floor((min_x - origin_x_) / res - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((min_y - origin_y_) / res - 0.5)));
    const int i1 = std::min(width() - 1, static_cast<int>(std::ceil((max_x - origin_x_) / res - 0.5)));
    const int j1 = std::min(height() - 1, static_cast<int>(std::ceil((max_y - origin_y_) / res - 0.5)));
    std::vector<CellIndex> out;
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const auto c = cell_center(i, j);
        if (poly.contains(c.x, c.y)) out.push_back({i, j});
      }
    return out;
  }

  /// Sets the elevation of unobserved cells under the polygon, e.g. the
  /// ground the robot is standing on. Returns the number of cells filled.
  std::size_t fill_unobserved(const FootprintPolygon& poly, double elevation) {
    std::size_t n = 0;
    for (const auto& c : cells_in_polygon(poly)) {
      GridCell& cell = at(c.i, c.j);
      if (cell.elevation) continue;
      cell = GridCell{};
      cell.elevation = elevation;
      ++n;
    }
    return n;
  }

  /// Nearest cell with a computed step feature within `radius` of (x, y);
  /// ties go to the lower (j, i).
  const GridCell* nearest_featured(double x, double y, double radius) const {
    const double res = cfg_.resolution;
    const int ci = static_cast<int>(std::floor((x - origin_x_) / res));
    const int cj = static_cast<int>(std::floor((y - origin_y_) / res));
    if (in_bounds(ci, cj) && at(ci, cj).step) return &at(ci, cj);
    const int r = static_cast<int>(std::ceil(radius / res));
    const GridCell* best = nullptr;
    double best_d2 = radius * radius;
    for (int j = cj - r; j <= cj + r; ++j)
      for (int i = ci - r; i <= ci + r; ++i) {
        if (!in_bounds(i, j) || !at(i, j).step) continue;
        const auto c = cell_center(i, j);
        const double d2 = (c.x - x) * (c.x - x) + (c.y - y) * (c.y - y);
        if (d2 < best_d2 || (best == nullptr && d2 <= best_d2)) {
          best = &at(i, j);
          best_d2 = d2;
        }
      }
    return best;
  }

  /// Mean geometric traversability over cells under the polygon that have one.
  std::optional<double> avg_geometric_traversability(const FootprintPolygon& poly) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells_in_polygon(poly)) {
      const auto& t = at(c.i, c.j).trav_g;
      if (!t) continue;
      sum += *t;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  void write_csv(std::ostream& os) const {
    os << "i,j,x,y,elevation,slope,roughness,step,risk,trav_g\n";
    char buf[64];
    auto put = [&](const std::optional<double>& v) {
      os << ',';
      if (v) {
        std::snprintf(buf, sizeof(buf), "%.9g", *v);
        os << buf;
      }
    };
    for (int j = 0; j < height(); ++j)
      for (int i = 0; i < width(); ++i) {
        const auto& c = at(i, j);
        const auto ctr = cell_center(i, j);
        os << i << ',' << j;
        std::snprintf(buf, sizeof(buf), ",%.9g,%.9g", ctr.x, ctr.y);
        os << buf;
        put(c.elevation);
        put(c.slope);
        put(c.roughness);
        put(c.step);
        put(c.risk);
        put(c.trav_g);
        os << '\n';
      }
  }

  /// Binary PGM (P5) of trav_g scaled to 0-255; cells without a value are 0.
  /// The first row written is j = height-1 so +y points up in viewers.
  void write_pgm(std::ostream& os) const {
    os << "P5\n" << width() << ' ' << height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(width()));
    for (int j = height() - 1; j >= 0; --j) {
      for (int i = 0; i < width(); ++i) {
        const auto& t = at(i, j).trav_g;
        row[i] = t ? static_cast<unsigned char>(std::lround(std::clamp(*t, 0.0, 1.0) * 255.0)) : 0;
      }
      os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
  }

 private:
  static bool solve3(const std::array<std::array<double, 3>, 3>& m, const std::array<double, 3>& rhs, double& x,
                     double& y, double& z) {
    auto det3 = [](const std::array<std::array<double, 3>, 3>& a) {
      return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
             a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double d = det3(m);
    if (std::abs(d) < 1e-18) return false;
    std::array<double, 3> sol{};
    for (int k = 0; k < 3; ++k) {
      auto mk = m;
      for (int r = 0; r < 3; ++r) mk[r][k] = rhs[r];
      sol[k] = det3(mk) / d;
    }
    x = sol[0];
    y = sol[1];
    z = sol[2];
    return true;
  }

  Config cfg_;
  int size_{0};
  double origin_x_{0.0};
  double origin_y_{0.0};
  int width_override_{0};
  int height_override_{0};
  bool initialized_{false};
  std::vector<GridCell> cells_;
};

}  // namespace travex
