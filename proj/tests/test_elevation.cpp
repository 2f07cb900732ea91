#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "travex/elevation_grid.hpp"

using namespace travex;

namespace {

TraversabilityGrid grid_from(int w, int h, double res, const std::function<double(double, double)>& z) {
  TraversabilityGrid g(0.0, 0.0, res, w, h);
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const Point2 c = g.cell_center(i, j);
      g.at(i, j).elevation = z(c.x, c.y);
    }
  return g;
}

// Cross-product point-in-convex-polygon with boundary inclusive.
bool inside_oracle(const FootprintPolygon& p, double x, double y) {
  bool pos = false, neg = false;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& a = p.vertices[k];
    const auto& b = p.vertices[(k + 1) % 4];
    const double c = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    if (c > 1e-12) pos = true;
    if (c < -1e-12) neg = true;
  }
  return !(pos && neg);
}

}  // namespace

TEST(Percentile, LinearInterpolation) {
  EXPECT_NEAR(percentile({0.0, 1.0}, 0.9), 0.9, 1e-12);
  EXPECT_DOUBLE_EQ(percentile({4.0}, 0.9), 4.0);
  EXPECT_NEAR(percentile({3.0, 1.0, 2.0, 4.0, 0.0}, 0.9), 3.6, 1e-12);
  EXPECT_THROW(percentile({}, 0.5), std::invalid_argument);
}

TEST(IntegrateScan, PercentilePerCellAndFlatPlane) {
  TraversabilityGrid::Config cfg;
  cfg.resolution = 0.1;
  cfg.window = 4.0;
  TraversabilityGrid g(cfg);
  std::vector<Point3> cloud;
  for (double x = -1.0; x <= 1.0; x += 0.02)
    for (double y = -1.0; y <= 1.0; y += 0.02) cloud.push_back({x + 0.003, y + 0.003, 0.0});
  g.integrate_scan(cloud, RobotState(0, 0, 0.5, 0));
  int hit = 0;
  for (int j = 0; j < g.height(); ++j)
    for (int i = 0; i < g.width(); ++i)
      if (g.at(i, j).elevation) {
        ++hit;
        EXPECT_NEAR(*g.at(i, j).elevation, 0.0, cfg.resolution / 2);
      }
  EXPECT_GT(hit, 300);

  TraversabilityGrid one(cfg);
  const std::vector<Point3> pair{{0.01, 0.01, 0.0}, {0.02, 0.02, 1.0}};
  one.integrate_scan(pair, RobotState(0, 0, 0, 0));
  ASSERT_TRUE(one.elevation_at(0.015, 0.015));
  EXPECT_NEAR(*one.elevation_at(0.015, 0.015), 0.9, 1e-12);

  TraversabilityGrid single(cfg);
  const std::vector<Point3> p{{0.55, -0.25, 0.37}};
  single.integrate_scan(p, RobotState(0, 0, 0, 0));
  EXPECT_DOUBLE_EQ(*single.elevation_at(0.55, -0.25), 0.37);

  single.integrate_scan({}, RobotState(0, 0, 0, 0));
  EXPECT_DOUBLE_EQ(*single.elevation_at(0.55, -0.25), 0.37);
}

TEST(Features, FlatPlaneIsZero) {
  auto g = grid_from(10, 10, 0.05, [](double, double) { return 1.25; });
  g.compute_features();
  for (int j = 1; j < 9; ++j)
    for (int i = 1; i < 9; ++i) {
      EXPECT_NEAR(*g.at(i, j).slope, 0.0, 1e-9);
      EXPECT_NEAR(*g.at(i, j).roughness, 0.0, 1e-9);
      EXPECT_NEAR(*g.at(i, j).step, 0.0, 1e-9);
    }
}

TEST(Features, RampSlopeMatchesAnalyticAngle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> grade(0.0, 1.3);
  std::uniform_real_distribution<double> dir(-kPi, kPi);
  for (int n = 0; n < 50; ++n) {
    const double angle = n == 0 ? kPi / 4 : grade(rng);
    const double phi = dir(rng);
    const double t = std::tan(angle);
    auto g = grid_from(12, 12, 0.05, [&](double x, double y) { return t * (x * std::cos(phi) + y * std::sin(phi)); });
    g.compute_features();
    for (int j = 1; j < 11; ++j)
      for (int i = 1; i < 11; ++i) {
        EXPECT_NEAR(*g.at(i, j).slope, angle, 0.02);
        EXPECT_NEAR(*g.at(i, j).roughness, 0.0, 1e-9);
      }
  }
}

TEST(Features, StepEdgeHeight) {
  auto g = grid_from(10, 10, 0.05, [](double x, double) { return x < 0.25 ? 0.0 : 0.3; });
  g.compute_features();
  for (int j = 1; j < 9; ++j) {
    EXPECT_NEAR(*g.at(4, j).step, 0.3, 1e-6);
    EXPECT_NEAR(*g.at(5, j).step, 0.3, 1e-6);
    EXPECT_NEAR(*g.at(2, j).step, 0.0, 1e-12);
  }
}

TEST(Features, SparseNeighbourhoodLeavesFeaturesAbsent) {
  TraversabilityGrid g(0.0, 0.0, 0.1, 5, 5);
  g.at(2, 2).elevation = 0.0;
  g.at(3, 2).elevation = 0.0;
  g.compute_features();
  EXPECT_FALSE(g.at(2, 2).slope);
  EXPECT_FALSE(g.at(0, 0).slope);
}

TEST(Risk, Examples) {
  const GeometricRiskParams p;
  EXPECT_DOUBLE_EQ(terrain_risk(0, 0, 0, p), 0.0);
  EXPECT_DOUBLE_EQ(geometric_traversability(0, 0, 0, p), 1.0);
  EXPECT_NEAR(terrain_risk(p.slope_crit / 2, 0, 0, p), 0.2, 1e-12);
  EXPECT_NEAR(geometric_traversability(p.slope_crit / 2, 0, 0, p), 0.8, 1e-12);
  EXPECT_DOUBLE_EQ(geometric_traversability(0, 0, p.step_crit * 1.5, p), 0.0);
}

TEST(Risk, ParamsValidate) {
  GeometricRiskParams p;
  p.w_slope = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.roughness_crit = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Risk, MatchesOracleAndHardZeroOnRandomFeatures) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 1000; ++n) {
    GeometricRiskParams p;
    const double a = u(rng), b = u(rng) * (1 - a);
    p.w_slope = a;
    p.w_roughness = b;
    p.w_step = 1.0 - a - b;
    const double s = u(rng) * 0.7, r = u(rng) * 0.15, h = u(rng) * 0.4;
    double risk = a * s / p.slope_crit + b * r / p.roughness_crit + p.w_step * h / p.step_crit;
    risk = risk < 0 ? 0 : risk > 1 ? 1 : risk;
    const bool critical = s >= p.slope_crit || r >= p.roughness_crit || h >= p.step_crit;
    EXPECT_NEAR(terrain_risk(s, r, h, p), risk, 1e-12);
    EXPECT_NEAR(geometric_traversability(s, r, h, p), critical ? 0.0 : 1.0 - risk, 1e-12);
    const double t = geometric_traversability(s, r, h, p);
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    // Monotone in each feature.
    EXPECT_LE(terrain_risk(s, r, h, p), terrain_risk(s + 0.01, r, h, p));
    EXPECT_LE(terrain_risk(s, r, h, p), terrain_risk(s, r + 0.01, h, p));
    EXPECT_LE(terrain_risk(s, r, h, p), terrain_risk(s, r, h + 0.01, p));
  }
}

TEST(Risk, ApplyRiskCellByCell) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> z(0.0, 0.3);
  TraversabilityGrid g(0.0, 0.0, 0.1, 20, 20);
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i < 20; ++i)
      if ((i * 7 + j * 3) % 11 != 0) g.at(i, j).elevation = z(rng);
  g.compute_features();
  const GeometricRiskParams p;
  g.apply_risk(p);
  for (int j = 0; j < 20; ++j)
    for (int i = 0; i < 20; ++i) {
      const auto& c = g.at(i, j);
      if (!c.slope) {
        EXPECT_FALSE(c.trav_g);
        continue;
      }
      const bool critical = *c.slope >= p.slope_crit || *c.roughness >= p.roughness_crit || *c.step >= p.step_crit;
      EXPECT_DOUBLE_EQ(*c.trav_g, critical ? 0.0 : 1.0 - *c.risk);
    }
}

TEST(Polygon, UnitSquareOnTenthGrid) {
  TraversabilityGrid g(0.0, 0.0, 0.1, 30, 30);
  FootprintPolygon p;
  p.vertices = {Point2{1.45, 0.55}, {1.45, 1.45}, {0.55, 1.45}, {0.55, 0.55}};
  EXPECT_EQ(g.cells_in_polygon(p).size(), 100u);
  FootprintPolygon tiny;
  tiny.vertices = {Point2{0.01, 0.01}, {0.02, 0.01}, {0.02, 0.02}, {0.01, 0.02}};
  EXPECT_TRUE(g.cells_in_polygon(tiny).empty());
  FootprintPolygon outside;
  outside.vertices = {Point2{10, 10}, {11, 10}, {11, 11}, {10, 11}};
  EXPECT_TRUE(g.cells_in_polygon(outside).empty());
}

TEST(Polygon, AgreesWithExhaustiveOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-1.0, 11.0);
  std::uniform_real_distribution<double> ext(0.05, 4.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int n = 0; n < 200; ++n) {
    const int w = 1 + static_cast<int>(rng() % 100), h = 1 + static_cast<int>(rng() % 100);
    TraversabilityGrid g(0.0, 0.0, 0.1, w, h);
    const auto poly = footprint_polygon(RobotState(pos(rng), pos(rng), 0, ang(rng)), BoundingBox(ext(rng), ext(rng), 1));
    std::vector<CellIndex> expect;
    for (int j = 0; j < h; ++j)
      for (int i = 0; i < w; ++i) {
        const Point2 c = g.cell_center(i, j);
        if (inside_oracle(poly, c.x, c.y)) expect.push_back({i, j});
      }
    auto got = g.cells_in_polygon(poly);
    std::sort(got.begin(), got.end());
    std::sort(expect.begin(), expect.end());
    EXPECT_EQ(got, expect);
  }
}

TEST(Polygon, AverageTraversability) {
  TraversabilityGrid g(0.0, 0.0, 0.1, 10, 10);
  FootprintPolygon p;
  p.vertices = {Point2{0.0, 0.0}, {0.2, 0.0}, {0.2, 0.1}, {0.0, 0.1}};
  EXPECT_FALSE(g.avg_geometric_traversability(p));
  g.at(0, 0).trav_g = 1.0;
  g.at(1, 0).trav_g = 0.5;
  ASSERT_TRUE(g.avg_geometric_traversability(p));
  EXPECT_NEAR(*g.avg_geometric_traversability(p), 0.75, 1e-12);

  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    TraversabilityGrid r(0.0, 0.0, 0.1, 20, 20);
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 20; ++i)
        if (u(rng) < 0.7) r.at(i, j).trav_g = u(rng);
    const auto poly = footprint_polygon(RobotState(u(rng) * 2, u(rng) * 2, 0, u(rng) * 6), BoundingBox(0.8, 0.5, 1));
    double lo = 1.0, hi = 0.0;
    bool any = false;
    for (const auto& c : r.cells_in_polygon(poly))
      if (const auto& t = r.at(c.i, c.j).trav_g) {
        any = true;
        lo = std::min(lo, *t);
        hi = std::max(hi, *t);
      }
    const auto avg = r.avg_geometric_traversability(poly);
    ASSERT_EQ(avg.has_value(), any);
    if (any) {
      EXPECT_GE(*avg, lo - 1e-12);
      EXPECT_LE(*avg, hi + 1e-12);
    }
  }
}

TEST(Export, CsvHeaderAndPgmSize) {
  TraversabilityGrid g(0.0, 0.0, 0.1, 3, 2);
  g.at(0, 0).elevation = 0.5;
  g.at(0, 0).trav_g = 1.0;
  std::ostringstream csv, pgm;
  g.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "i,j,x,y,elevation,slope,roughness,step,risk,trav_g");
  g.write_pgm(pgm);
  EXPECT_EQ(pgm.str().substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(pgm.str().size(), 11u + 6u);
}
