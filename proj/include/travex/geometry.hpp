#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace travex {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  if (!std::isfinite(a)) throw std::invalid_argument("normalize_angle: non-finite angle");
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

struct Point3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  friend Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Point3 operator*(const Point3& a, double s) { return s * a; }
  friend bool operator==(const Point3&, const Point3&) = default;

  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }

struct Point2 {
  double x{0.0};
  double y{0.0};
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Agent pose: position in the world frame plus heading.
struct RobotState {
  double x{0.0};
  double y{0.0};
  double z{0.0};
  double psi{0.0};

  RobotState() = default;
  RobotState(double x_, double y_, double z_, double psi_) : x(x_), y(y_), z(z_), psi(normalize_angle(psi_)) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw std::invalid_argument("RobotState: non-finite coordinate");
  }

  Point3 position() const { return {x, y, z}; }
  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct LabeledPoint {
  Point3 position;
  double traversability{0.0};
};

struct BoundingBox {
  double length{1.0};
  double width{0.7};
  double height{0.8};

  BoundingBox() = default;
  BoundingBox(double l, double w, double d) : length(l), width(w), height(d) {
    if (!(l > 0.0) || !(w > 0.0) || !(d > 0.0)) throw std::invalid_argument("BoundingBox: extents must be positive");
  }
};

/// Ground-plane footprint of a box, four vertices counter-clockwise.
struct FootprintPolygon {
  std::array<Point2, 4> vertices;

  double area() const {
    double twice = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& a = vertices[i];
      const auto& b = vertices[(i + 1) % 4];
      twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
  }

  /// Inside-or-on-boundary test for the convex CCW polygon.
  bool contains(double px, double py, double eps = 1e-12) const {
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& a = vertices[i];
      const auto& b = vertices[(i + 1) % 4];
      const double cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
      if (cross < -eps) return false;
    }
    return true;
  }

  void bounds(double& min_x, double& min_y, double& max_x, double& max_y) const {
    min_x = max_x = vertices[0].x;
    min_y = max_y = vertices[0].y;
    for (const auto& v : vertices) {
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_y = std::min(min_y, v.y);
      max_y = std::max(max_y, v.y);
    }
  }
};

/// p = (x, y) + R(psi) (s1 l/2, s2 w/2), ordered (+,+), (-,+), (-,-), (+,-).
inline FootprintPolygon footprint_polygon(const RobotState& state, const BoundingBox& box) {
  const double lh = box.length / 2.0;
  const double wh = box.width / 2.0;
  const double c = std::cos(state.psi);
  const double s = std::sin(state.psi);
  constexpr std::array<std::array<int, 2>, 4> signs{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  FootprintPolygon poly;
  for (std::size_t i = 0; i < 4; ++i) {
    const double dx = signs[i][0] * lh;
    const double dy = signs[i][1] * wh;
    poly.vertices[i] = {state.x + c * dx - s * dy, state.y + s * dx + c * dy};
  }
  return poly;
}

using Matrix3 = std::array<std::array<double, 3>, 3>;

struct RigidTransform {
  Matrix3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Point3 translation{};

  static RigidTransform identity() { return {}; }

  static RigidTransform from_yaw(double yaw, Point3 t = {}) {
    RigidTransform tf;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    tf.rotation = {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
    tf.translation = t;
    return tf;
  }

  /// Z-Y-X (yaw, pitch, roll) rotation.
  static RigidTransform from_ypr(double yaw, double pitch, double roll, Point3 t = {}) {
    const double cy = std::cos(yaw), sy = std::sin(yaw);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cr = std::cos(roll), sr = std::sin(roll);
    RigidTransform tf;
    tf.rotation = {{{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
                    {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
                    {-sp, cp * sr, cp * cr}}};
    tf.translation = t;
    return tf;
  }

  Point3 rotate(const Point3& p) const {
    const auto& r = rotation;
    return {r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z, r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z};
  }

  RigidTransform inverse() const {
    RigidTransform inv;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) inv.rotation[i][j] = rotation[j][i];
    const Point3 t = inv.rotate(translation);
    inv.translation = {-t.x, -t.y, -t.z};
    return inv;
  }

  /// this * other (apply other first).
  RigidTransform compose(const RigidTransform& other) const {
    RigidTransform out;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += rotation[i][k] * other.rotation[k][j];
        out.rotation[i][j] = acc;
      }
    out.translation = rotate(other.translation) + translation;
    return out;
  }

  double determinant() const {
    const auto& r = rotation;
    return r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
           r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  }

  bool is_valid(double tol = 1e-6) const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += rotation[k][i] * rotation[k][j];
        if (std::abs(acc - (i == j ? 1.0 : 0.0)) > tol) return false;
      }
    return std::abs(determinant() - 1.0) <= tol && translation.finite();
  }

  /// Heading of the rotated x axis, used to carry yaw through a transform.
  double yaw() const { return std::atan2(rotation[1][0], rotation[0][0]); }

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

inline Point3 transform_point(const Point3& p, const RigidTransform& tf) { return tf.rotate(p) + tf.translation; }

struct CameraIntrinsics {
  double fx{100.0};
  double fy{100.0};
  double cx{50.0};
  double cy{50.0};
  int width{100};
  int height{100};

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (!(cx >= 0.0 && cx < w) || !(cy >= 0.0 && cy < h))
      throw std::invalid_argument("CameraIntrinsics: principal point outside image");
  }
};

struct Pixel {
  double u{0.0};
  double v{0.0};
};

/// Pinhole projection: extrinsics, then K, then divide by depth. Absent for
/// points behind the camera or outside [0, width) x [0, height).
inline std::optional<Pixel> project_point_to_image(const Point3& p, const RigidTransform& extrinsics,
                                                   const CameraIntrinsics& intr) {
  const Point3 c = transform_point(p, extrinsics);
  if (!(c.z > 0.0)) return std::nullopt;
  const double u = (intr.fx * c.x + intr.cx * c.z) / c.z;
  const double v = (intr.fy * c.y + intr.cy * c.z) / c.z;
  if (!(u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height)) return std::nullopt;
  return Pixel{u, v};
}

/// Round-half-up pixel index used at image lookup time.
inline int pixel_index(double coord) { return static_cast<int>(std::floor(coord + 0.5)); }

}  // namespace travex
