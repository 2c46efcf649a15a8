#include "viap/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace viap {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) { return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x}; }
double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

void quad(std::vector<Triangle>& out, Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
  out.push_back({{a, b, c}});
  out.push_back({{a, c, d}});
}

std::vector<Triangle> cube_mesh() {
  constexpr double h = 0.55;
  const Vec3 p[8] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                     {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
  std::vector<Triangle> m;
  quad(m, p[0], p[1], p[2], p[3]);
  quad(m, p[5], p[4], p[7], p[6]);
  quad(m, p[4], p[0], p[3], p[7]);
  quad(m, p[1], p[5], p[6], p[2]);
  quad(m, p[3], p[2], p[6], p[7]);
  quad(m, p[4], p[5], p[1], p[0]);
  return m;
}

std::vector<Triangle> sphere_mesh(int n) {
  constexpr double r = 0.8;
  auto at = [&](int i, int j) {
    const double t = kPi * i / n, p = 2.0 * kPi * j / n;
    return Vec3{r * std::sin(t) * std::cos(p), r * std::cos(t), r * std::sin(t) * std::sin(p)};
  };
  std::vector<Triangle> m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) quad(m, at(i, j), at(i, j + 1), at(i + 1, j + 1), at(i + 1, j));
  return m;
}

std::vector<Triangle> torus_mesh(int n) {
  constexpr double major = 0.6, minor = 0.25;
  auto at = [&](int i, int j) {
    const double u = 2.0 * kPi * i / n, v = 2.0 * kPi * j / n;
    const double ring = major + minor * std::cos(v);
    return Vec3{ring * std::cos(u), minor * std::sin(v), ring * std::sin(u)};
  };
  std::vector<Triangle> m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) quad(m, at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
  return m;
}

// Cone (top_radius == 0) or cylinder around the y axis, centred at the origin.
std::vector<Triangle> frustum_mesh(int n, double bottom_radius, double top_radius, double height) {
  const double y0 = -height / 2, y1 = height / 2;
  auto ring = [&](double radius, double y, int j) {
    const double p = 2.0 * kPi * j / n;
    return Vec3{radius * std::cos(p), y, radius * std::sin(p)};
  };
  std::vector<Triangle> m;
  const Vec3 bottom{0, y0, 0}, top{0, y1, 0};
  for (int j = 0; j < n; ++j) {
    const Vec3 b0 = ring(bottom_radius, y0, j), b1 = ring(bottom_radius, y0, j + 1);
    m.push_back({{bottom, b1, b0}});
    if (top_radius > 0.0) {
      const Vec3 t0 = ring(top_radius, y1, j), t1 = ring(top_radius, y1, j + 1);
      quad(m, b0, b1, t1, t0);
      m.push_back({{top, t0, t1}});
    } else {
      m.push_back({{b0, b1, top}});
    }
  }
  return m;
}

std::vector<Triangle> octahedron_mesh() {
  constexpr double r = 0.9;
  const Vec3 px{r, 0, 0}, nx{-r, 0, 0}, py{0, r, 0}, ny{0, -r, 0}, pz{0, 0, r}, nz{0, 0, -r};
  return {{{px, py, pz}}, {{pz, py, nx}}, {{nx, py, nz}}, {{nz, py, px}},
          {{px, pz, ny}}, {{pz, nx, ny}}, {{nx, nz, ny}}, {{nz, px, ny}}};
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::cube: return "cube";
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cone: return "cone";
    case ShapeKind::torus: return "torus";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::octahedron: return "octahedron";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  for (ShapeKind k : {ShapeKind::cube, ShapeKind::sphere, ShapeKind::cone, ShapeKind::torus, ShapeKind::cylinder,
                      ShapeKind::octahedron}) {
    if (to_string(k) == name) return k;
  }
  throw Error("bad_config", "unknown shape kind '" + name + "'");
}

std::string to_string(PoseAxis axis) {
  switch (axis) {
    case PoseAxis::polar: return "polar";
    case PoseAxis::azimuth: return "azimuth";
    case PoseAxis::radius: return "radius";
  }
  return "unknown";
}

PoseAxis pose_axis_from_string(const std::string& name) {
  if (name == "polar") return PoseAxis::polar;
  if (name == "azimuth") return PoseAxis::azimuth;
  if (name == "radius") return PoseAxis::radius;
  throw Error("bad_config", "unknown pose axis '" + name + "'");
}

void ShapeSpec::validate() const {
  if (!(size > 0.0)) throw Error("bad_shape", "shape size must be positive");
  for (double c : albedo) {
    if (!(c >= 0.0 && c <= 1.0)) throw Error("bad_shape", "albedo components must lie in [0,1]");
  }
}

void CameraPose::validate() const {
  if (!(theta >= 0.0 && theta <= kPi) || !(phi >= 0.0 && phi < 2.0 * kPi) || !(radius > 0.0)) {
    throw Error("invalid_pose", "camera pose out of range");
  }
}

CameraPose sample_camera(const CameraPose& base, double jitter_frac, std::optional<PoseAxis> only,
                         std::mt19937_64& rng) {
  if (!(jitter_frac >= 0.0 && jitter_frac < 1.0)) throw Error("bad_config", "jitter fraction must be in [0,1)");
  base.validate();
  if (jitter_frac == 0.0) return base;
  std::uniform_real_distribution<double> u(-jitter_frac, jitter_frac);
  CameraPose p = base;
  if (!only || *only == PoseAxis::polar) p.theta = std::clamp(base.theta * (1.0 + u(rng)), 0.0, kPi);
  if (!only || *only == PoseAxis::azimuth) {
    p.phi = std::fmod(base.phi * (1.0 + u(rng)), 2.0 * kPi);
    if (p.phi < 0.0) p.phi += 2.0 * kPi;
    if (p.phi >= 2.0 * kPi) p.phi = 0.0;
  }
  if (!only || *only == PoseAxis::radius) p.radius = base.radius * (1.0 + u(rng));
  return p;
}

std::vector<Triangle> build_mesh(const ShapeSpec& shape, int segments) {
  shape.validate();
  if (segments < 3) throw Error("bad_config", "tessellation needs at least 3 segments");
  std::vector<Triangle> mesh;
  switch (shape.kind) {
    case ShapeKind::cube: mesh = cube_mesh(); break;
    case ShapeKind::sphere: mesh = sphere_mesh(segments); break;
    case ShapeKind::cone: mesh = frustum_mesh(segments, 0.7, 0.0, 1.4); break;
    case ShapeKind::torus: mesh = torus_mesh(segments); break;
    case ShapeKind::cylinder: mesh = frustum_mesh(segments, 0.6, 0.6, 1.2); break;
    case ShapeKind::octahedron: mesh = octahedron_mesh(); break;
  }
  const double c = std::cos(shape.yaw), s = std::sin(shape.yaw);
  for (Triangle& t : mesh)
    for (Vec3& v : t.v) v = Vec3{shape.size * (c * v.x + s * v.z), shape.size * v.y, shape.size * (-s * v.x + c * v.z)};
  return mesh;
}

double bounding_radius(const std::vector<Triangle>& mesh) {
  double r = 0.0;
  for (const Triangle& t : mesh)
    for (const Vec3& v : t.v) r = std::max(r, norm(v));
  return r;
}

Tensor render(const ShapeSpec& shape, const CameraPose& pose, const RenderConfig& config) {
  pose.validate();
  const std::vector<Triangle> mesh = build_mesh(shape, config.segments);
  if (pose.radius <= bounding_radius(mesh)) {
    throw Error("degenerate_pose", "camera radius " + std::to_string(pose.radius) +
                                       " is inside the object's bounding sphere");
  }
  const std::size_t H = config.height, W = config.width;

  const Vec3 eye{pose.radius * std::sin(pose.theta) * std::cos(pose.phi), pose.radius * std::cos(pose.theta),
                 pose.radius * std::sin(pose.theta) * std::sin(pose.phi)};
  const Vec3 fwd = normalized(-1.0 * eye);
  Vec3 side = cross(fwd, Vec3{0, 1, 0});
  if (norm(side) < 1e-9) side = cross(fwd, Vec3{0, 0, 1});
  const Vec3 right = normalized(side);
  const Vec3 up = cross(right, fwd);
  const Vec3 light =
      normalized(config.light[0] * right + config.light[1] * up + (-config.light[2]) * fwd);
  const double focal = 1.0 / std::tan(config.fov_degrees * kPi / 360.0);

  Tensor image({H, W, 3});
  for (std::size_t i = 0; i < H * W; ++i)
    for (std::size_t c = 0; c < 3; ++c) image[i * 3 + c] = config.background[c];
  std::vector<double> depth(H * W, std::numeric_limits<double>::infinity());

  struct ScreenVertex {
    double x, y, z;
  };
  for (const Triangle& tri : mesh) {
    ScreenVertex sv[3];
    for (int k = 0; k < 3; ++k) {
      const Vec3 rel = tri.v[k] - eye;
      const double zc = dot(rel, fwd);
      sv[k] = {(dot(rel, right) / zc * focal + 1.0) * 0.5 * static_cast<double>(W),
               (1.0 - dot(rel, up) / zc * focal) * 0.5 * static_cast<double>(H), zc};
    }
    auto edge = [](const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
      return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    };
    const double area = edge(sv[0], sv[1], sv[2].x, sv[2].y);
    if (std::abs(area) < 1e-12) continue;

    Vec3 n = normalized(cross(tri.v[1] - tri.v[0], tri.v[2] - tri.v[0]));
    if (dot(n, eye - tri.v[0]) < 0.0) n = -1.0 * n;
    const double shade = config.ambient + (1.0 - config.ambient) * std::max(0.0, dot(n, light));

    const double min_x = std::min({sv[0].x, sv[1].x, sv[2].x}), max_x = std::max({sv[0].x, sv[1].x, sv[2].x});
    const double min_y = std::min({sv[0].y, sv[1].y, sv[2].y}), max_y = std::max({sv[0].y, sv[1].y, sv[2].y});
    const long x0 = std::max(0L, static_cast<long>(std::floor(min_x)));
    const long x1 = std::min(static_cast<long>(W) - 1, static_cast<long>(std::ceil(max_x)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(min_y)));
    const long y1 = std::min(static_cast<long>(H) - 1, static_cast<long>(std::ceil(max_y)));
    for (long py = y0; py <= y1; ++py)
      for (long px = x0; px <= x1; ++px) {
        const double cx = px + 0.5, cy = py + 0.5;
        const double w0 = edge(sv[1], sv[2], cx, cy) / area;
        const double w1 = edge(sv[2], sv[0], cx, cy) / area;
        const double w2 = edge(sv[0], sv[1], cx, cy) / area;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double z = 1.0 / (w0 / sv[0].z + w1 / sv[1].z + w2 / sv[2].z);
        const std::size_t pix = static_cast<std::size_t>(py) * W + static_cast<std::size_t>(px);
        if (z >= depth[pix]) continue;
        depth[pix] = z;
        for (std::size_t c = 0; c < 3; ++c) image[pix * 3 + c] = std::clamp(shape.albedo[c] * shade, 0.0, 1.0);
      }
  }
  return image;
}

}  // namespace viap
