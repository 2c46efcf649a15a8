#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "viap/tensor.hpp"

namespace viap {

enum class ShapeKind { cube, sphere, cone, torus, cylinder, octahedron };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

using Rgb = std::array<double, 3>;

/// One object instance. Jitter is already baked into size, albedo and yaw;
/// `seed` records where it came from.
struct ShapeSpec {
  std::size_t class_id = 0;
  ShapeKind kind = ShapeKind::cube;
  double size = 1.0;  // uniform scale of the canonical mesh
  Rgb albedo{0.5, 0.5, 0.5};
  double yaw = 0.0;  // rotation about the vertical axis, radians
  std::uint64_t seed = 0;

  void validate() const;
};

/// Camera position on a sphere around the origin, looking at the origin.
/// theta is measured from +y (up), phi around y starting at +x.
struct CameraPose {
  double theta = 0.0;
  double phi = 0.0;
  double radius = 1.0;

  void validate() const;
  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

enum class PoseAxis { polar, azimuth, radius };

std::string to_string(PoseAxis axis);
PoseAxis pose_axis_from_string(const std::string& name);

/// Multiplies each jittered coordinate by (1 + u), u ~ U(-jitter, +jitter),
/// then folds the result back into the valid ranges. With `only` set, the
/// other two coordinates are returned untouched.
CameraPose sample_camera(const CameraPose& base, double jitter_frac, std::optional<PoseAxis> only,
                         std::mt19937_64& rng);

struct RenderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  double fov_degrees = 45.0;
  Rgb background{0.9, 0.9, 0.9};
  int segments = 24;
  double ambient = 0.3;
  // Direction towards the light in camera coordinates (right, up, back).
  std::array<double, 3> light{-0.4, 0.6, 1.0};
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Triangle {
  std::array<Vec3, 3> v;
};

/// Canonical mesh, scaled and yawed, in world coordinates.
std::vector<Triangle> build_mesh(const ShapeSpec& shape, int segments);
double bounding_radius(const std::vector<Triangle>& mesh);

/// Perspective, depth-buffered, flat Lambertian render into [H,W,3] with
/// values in [0,1]. Pixels no triangle covers hold the background colour.
Tensor render(const ShapeSpec& shape, const CameraPose& pose, const RenderConfig& config = {});

}  // namespace viap
