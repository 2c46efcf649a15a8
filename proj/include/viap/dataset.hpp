#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "viap/render.hpp"
#include "viap/tensor.hpp"

namespace viap {

struct ClassSpec {
  std::string name;
  ShapeKind kind = ShapeKind::cube;
  Rgb albedo{0.5, 0.5, 0.5};
};

/// First `count` entries of the built-in class table (2 <= count <= 14).
std::vector<ClassSpec> default_classes(std::size_t count = 4);

/// Render defaults for datasets: flat, bright lighting.
inline RenderConfig dataset_render() {
  RenderConfig r;
  r.ambient = 0.8;
  return r;
}

struct DatasetConfig {
  std::vector<ClassSpec> classes = default_classes(4);
  std::size_t objects_per_class = 4;
  std::size_t views_per_object = 10;
  std::size_t train_views_per_object = 7;
  double jitter_frac = 0.15;
  std::optional<PoseAxis> jitter_axis;  // unset: jitter all three coordinates
  double camera_radius = 3.2;
  double polar_min = 0.25 * 3.14159265358979323846;
  double polar_max = 0.50 * 3.14159265358979323846;
  RenderConfig render = dataset_render();
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

enum class Split { train, test };
std::string to_string(Split split);

struct LabeledView {
  Tensor image;  // [H,W,3], values in [0,1]
  std::size_t label = 0;
  std::size_t object_id = 0;
  std::size_t view_id = 0;
  CameraPose pose;
  Split split = Split::train;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<ShapeSpec> objects;   // indexed by object_id
  std::vector<LabeledView> views;   // ordered by (class, object, view)
  std::uint64_t seed = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t num_classes() const { return class_names.size(); }
  std::vector<const LabeledView*> split(Split which) const;
  std::vector<const LabeledView*> object_views(std::size_t object_id, Split which) const;
};

/// Renders every (class, object, view) triple. Rendering runs in parallel;
/// all randomness is drawn up front from `config.seed`.
Dataset generate_dataset(const DatasetConfig& config);

/// Manifest describing the image store: class table, per-record pose, label,
/// split tag and byte offset into images.bin.
nlohmann::json manifest_json(const Dataset& dataset);

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kImageStoreFile = "images.bin";

void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Binary PPM (P6), channels quantised with round(v * 255).
void export_ppm(const Tensor& image, const std::string& path);

Tensor stack_images(const std::vector<const LabeledView*>& views);
std::vector<std::size_t> labels_of(const std::vector<const LabeledView*>& views);

}  // namespace viap
