#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "travex/geometry.hpp"

namespace travex {

enum class TerrainClass : std::uint8_t { Untraversable = 0, Undesirable = 1, Rough = 2, Optimal = 3 };

inline const char* to_string(TerrainClass c) {
  switch (c) {
    case TerrainClass::Untraversable: return "untraversable";
    case TerrainClass::Undesirable: return "undesirable";
    case TerrainClass::Rough: return "rough";
    case TerrainClass::Optimal: return "optimal";
  }
  return "?";
}

inline TerrainClass terrain_class_from_index(int v) {
  if (v < 0 || v > 3) throw std::invalid_argument("terrain class index out of range: " + std::to_string(v));
  return static_cast<TerrainClass>(v);
}

/// Per-class maximum traversability.
struct AlphaTable {
  std::array<double, 4> alpha{0.0, 0.25, 0.6, 1.0};

  double operator()(TerrainClass c) const { return alpha[static_cast<std::size_t>(c)]; }

  void validate() const {
    if (alpha[0] != 0.0) throw std::invalid_argument("AlphaTable: untraversable alpha must be 0");
    for (std::size_t k = 1; k < alpha.size(); ++k)
      if (!(alpha[k] > alpha[k - 1])) throw std::invalid_argument("AlphaTable: alpha must strictly increase");
    if (alpha[3] > 1.0) throw std::invalid_argument("AlphaTable: alpha must not exceed 1");
  }
};

/// T(alpha, theta) = alpha * exp(-theta / alpha); 0 for alpha = 0. theta is
/// clamped to [0, pi/2].
inline double traversability_decay(double alpha, double theta) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("traversability_decay: alpha outside [0,1]");
  if (alpha == 0.0) return 0.0;
  theta = std::clamp(theta, 0.0, kPi / 2.0);
  return alpha * std::exp(-theta / alpha);
}

template <typename T>
struct Image {
  int width{0};
  int height{0};
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("Image: dimensions must be positive");
  }
  T& operator()(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  const T& operator()(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
};

using LabelImage = Image<TerrainClass>;
using SlopeImage = Image<float>;

/// Projects sensor-frame points into the label/slope images, scores the hit
/// pixel and returns the surviving points in the world frame.
inline std::vector<LabeledPoint> label_point_cloud(std::span<const Point3> cloud, const LabelImage& labels,
                                                   const SlopeImage& slopes, const RigidTransform& camera_from_sensor,
                                                   const CameraIntrinsics& intr, const RigidTransform& world_from_sensor,
                                                   const AlphaTable& alphas = {}) {
  if (labels.width != slopes.width || labels.height != slopes.height)
    throw std::invalid_argument("label_point_cloud: label and slope images differ in size");
  if (labels.width != intr.width || labels.height != intr.height)
    throw std::invalid_argument("label_point_cloud: image size does not match intrinsics");
  std::vector<LabeledPoint> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) {
    const auto px = project_point_to_image(p, camera_from_sensor, intr);
    if (!px) continue;
    const int u = std::min(pixel_index(px->u), labels.width - 1);
    const int v = std::min(pixel_index(px->v), labels.height - 1);
    const double ts = traversability_decay(alphas(labels(u, v)), slopes(u, v));
    out.push_back({transform_point(p, world_from_sensor), ts});
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(os, u);
}

inline float get_f32(std::istream& is) {
  const std::uint32_t u = get_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline std::string pgm_token(std::istream& is) {
  std::string tok;
  char c;
  while (is.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  if (tok.empty()) throw std::runtime_error("PGM: truncated header");
  return tok;
}

}  // namespace detail

/// 8-bit binary PGM (P5). Row 0 is the first row in the file.
inline Image<std::uint8_t> read_pgm(std::istream& is) {
  if (detail::pgm_token(is) != "P5") throw std::runtime_error("PGM: expected P5 magic");
  const int w = std::stoi(detail::pgm_token(is));
  const int h = std::stoi(detail::pgm_token(is));
  const int maxval = std::stoi(detail::pgm_token(is));
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw std::runtime_error("PGM: unsupported header");
  Image<std::uint8_t> img(w, h);
  if (!is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size())))
    throw std::runtime_error("PGM: truncated pixel data");
  return img;
}

inline void write_pgm(std::ostream& os, const Image<std::uint8_t>& img) {
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

inline LabelImage read_label_pgm(std::istream& is) {
  const auto raw = read_pgm(is);
  LabelImage out(raw.width, raw.height);
  for (std::size_t k = 0; k < raw.data.size(); ++k) out.data[k] = terrain_class_from_index(raw.data[k]);
  return out;
}

inline void write_label_pgm(std::ostream& os, const LabelImage& labels) {
  Image<std::uint8_t> raw(labels.width, labels.height);
  for (std::size_t k = 0; k < labels.data.size(); ++k) raw.data[k] = static_cast<std::uint8_t>(labels.data[k]);
  write_pgm(os, raw);
}

inline constexpr char kSlopeMagic[4] = {'S', 'L', 'P', 'F'};
inline constexpr char kHeightMagic[4] = {'H', 'G', 'T', 'F'};

/// 16-byte header (4-byte magic, u32 width, u32 height, u32 reserved = 0)
/// followed by width*height little-endian f32 values, row-major.
inline void write_float_grid(std::ostream& os, const Image<float>& img, const char (&magic)[4] = kSlopeMagic) {
  os.write(magic, 4);
  detail::put_u32(os, static_cast<std::uint32_t>(img.width));
  detail::put_u32(os, static_cast<std::uint32_t>(img.height));
  detail::put_u32(os, 0);
  for (float f : img.data) detail::put_f32(os, f);
}

inline Image<float> read_float_grid(std::istream& is, const char (&magic)[4] = kSlopeMagic) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0) throw std::runtime_error("float grid: bad magic");
  const auto w = detail::get_u32(is);
  const auto h = detail::get_u32(is);
  (void)detail::get_u32(is);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw std::runtime_error("float grid: bad dimensions");
  Image<float> img(static_cast<int>(w), static_cast<int>(h));
  for (auto& f : img.data) f = detail::get_f32(is);
  return img;
}

}  // namespace travex
