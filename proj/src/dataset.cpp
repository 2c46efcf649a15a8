#include "viap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "internal/binary_io.hpp"

namespace viap {

using nlohmann::json;

namespace {

const std::vector<ClassSpec>& class_table() {
  // Shape is the only cue: every class shares one low-contrast gray.
  static const std::vector<ClassSpec> table = {
      {"cube", ShapeKind::cube, {0.80, 0.80, 0.80}},
      {"sphere", ShapeKind::sphere, {0.80, 0.80, 0.80}},
      {"cone", ShapeKind::cone, {0.80, 0.80, 0.80}},
      {"torus", ShapeKind::torus, {0.80, 0.80, 0.80}},
      {"cylinder", ShapeKind::cylinder, {0.80, 0.80, 0.80}},
      {"octahedron", ShapeKind::octahedron, {0.80, 0.80, 0.80}},
      {"dark_cube", ShapeKind::cube, {0.55, 0.55, 0.55}},
      {"dark_torus", ShapeKind::torus, {0.55, 0.55, 0.55}},
      {"dark_cone", ShapeKind::cone, {0.55, 0.55, 0.55}},
      {"dark_cylinder", ShapeKind::cylinder, {0.55, 0.55, 0.55}},
      {"dark_octahedron", ShapeKind::octahedron, {0.55, 0.55, 0.55}},
      {"dark_sphere", ShapeKind::sphere, {0.55, 0.55, 0.55}},
      {"pale_cube", ShapeKind::cube, {0.65, 0.65, 0.70}},
      {"pale_cone", ShapeKind::cone, {0.65, 0.65, 0.70}},
  };
  return table;
}

constexpr double kSizeJitterLow = 0.85;
constexpr double kSizeJitterHigh = 1.10;
constexpr double kAlbedoJitter = 0.06;

std::string split_tag(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw Error("bad_file", "unknown split tag '" + s + "'");
}

}  // namespace

std::vector<ClassSpec> default_classes(std::size_t count) {
  if (count < 2 || count > class_table().size()) {
    throw Error("bad_config", "class count must be in [2," + std::to_string(class_table().size()) + "]");
  }
  return {class_table().begin(), class_table().begin() + static_cast<long>(count)};
}

void DatasetConfig::validate() const {
  if (classes.size() < 2) throw Error("bad_config", "dataset needs at least two classes");
  if (objects_per_class < 1) throw Error("bad_config", "objects_per_class must be >= 1");
  if (views_per_object < 2) throw Error("bad_config", "views_per_object must be >= 2 to form a train/test split");
  if (train_views_per_object < 1 || train_views_per_object >= views_per_object) {
    throw Error("bad_config", "train_views_per_object must leave at least one view in each split");
  }
  if (!(jitter_frac >= 0.0 && jitter_frac < 1.0)) throw Error("bad_config", "jitter_frac must be in [0,1)");
  if (!(polar_min >= 0.0 && polar_min <= polar_max && polar_max <= std::numbers::pi)) {
    throw Error("bad_config", "polar range must satisfy 0 <= min <= max <= pi");
  }
  if (render.height % 4 || render.width % 4 || render.height == 0 || render.width == 0) {
    throw Error("bad_config", "render resolution must be a positive multiple of 4");
  }
  if (!(render.ambient >= 0.0 && render.ambient <= 1.0)) throw Error("bad_config", "ambient must be in [0,1]");
}

std::string to_string(Split split) { return split_tag(split); }

void to_json(json& j, const DatasetConfig& c) {
  json classes = json::array();
  for (const ClassSpec& cs : c.classes) {
    classes.push_back({{"name", cs.name}, {"kind", to_string(cs.kind)}, {"albedo", cs.albedo}});
  }
  j = json{{"classes", classes},
           {"objects_per_class", c.objects_per_class},
           {"views_per_object", c.views_per_object},
           {"train_views_per_object", c.train_views_per_object},
           {"jitter_frac", c.jitter_frac},
           {"jitter_axis", c.jitter_axis ? to_string(*c.jitter_axis) : "all"},
           {"camera_radius", c.camera_radius},
           {"polar_min", c.polar_min},
           {"polar_max", c.polar_max},
           {"resolution", c.render.height},
           {"ambient", c.render.ambient},
           {"seed", c.seed}};
}

void from_json(const json& j, DatasetConfig& c) {
  if (j.contains("classes")) {
    const json& cl = j.at("classes");
    if (cl.is_number_unsigned()) {
      c.classes = default_classes(cl.get<std::size_t>());
    } else {
      c.classes.clear();
      for (const json& e : cl) {
        ClassSpec cs;
        cs.name = e.at("name").get<std::string>();
        cs.kind = shape_kind_from_string(e.at("kind").get<std::string>());
        cs.albedo = e.at("albedo").get<Rgb>();
        c.classes.push_back(cs);
      }
    }
  }
  c.objects_per_class = j.value("objects_per_class", c.objects_per_class);
  c.views_per_object = j.value("views_per_object", c.views_per_object);
  c.train_views_per_object = j.value("train_views_per_object", c.train_views_per_object);
  c.jitter_frac = j.value("jitter_frac", c.jitter_frac);
  if (j.contains("jitter_axis")) {
    const auto axis = j.at("jitter_axis").get<std::string>();
    c.jitter_axis = axis == "all" ? std::nullopt : std::optional<PoseAxis>(pose_axis_from_string(axis));
  }
  c.camera_radius = j.value("camera_radius", c.camera_radius);
  c.polar_min = j.value("polar_min", c.polar_min);
  c.polar_max = j.value("polar_max", c.polar_max);
  if (j.contains("resolution")) c.render.height = c.render.width = j.at("resolution").get<std::size_t>();
  c.render.ambient = j.value("ambient", c.render.ambient);
  c.seed = j.value("seed", c.seed);
}

std::vector<const LabeledView*> Dataset::split(Split which) const {
  std::vector<const LabeledView*> out;
  for (const LabeledView& v : views)
    if (v.split == which) out.push_back(&v);
  return out;
}

std::vector<const LabeledView*> Dataset::object_views(std::size_t object_id, Split which) const {
  std::vector<const LabeledView*> out;
  for (const LabeledView& v : views)
    if (v.object_id == object_id && v.split == which) out.push_back(&v);
  return out;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.seed = config.seed;
  ds.height = config.render.height;
  ds.width = config.render.width;
  for (const ClassSpec& c : config.classes) ds.class_names.push_back(c.name);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 0; c < config.classes.size(); ++c) {
    for (std::size_t o = 0; o < config.objects_per_class; ++o) {
      ShapeSpec shape;
      shape.class_id = c;
      shape.kind = config.classes[c].kind;
      shape.seed = rng();
      std::mt19937_64 inst(shape.seed);
      shape.size = kSizeJitterLow + (kSizeJitterHigh - kSizeJitterLow) * unit(inst);
      for (std::size_t k = 0; k < 3; ++k) {
        shape.albedo[k] =
            std::clamp(config.classes[c].albedo[k] + kAlbedoJitter * (2.0 * unit(inst) - 1.0), 0.0, 1.0);
      }
      shape.yaw = 2.0 * std::numbers::pi * unit(inst);
      const std::size_t object_id = ds.objects.size();
      ds.objects.push_back(shape);

      for (std::size_t v = 0; v < config.views_per_object; ++v) {
        CameraPose base;
        base.theta = config.polar_min + (config.polar_max - config.polar_min) * unit(inst);
        base.phi = 2.0 * std::numbers::pi * unit(inst);
        base.radius = config.camera_radius;
        LabeledView view;
        view.pose = sample_camera(base, config.jitter_frac, config.jitter_axis, inst);
        view.label = c;
        view.object_id = object_id;
        view.view_id = v;
        view.split = v < config.train_views_per_object ? Split::train : Split::test;
        ds.views.push_back(std::move(view));
      }
    }
  }

  const long long n = static_cast<long long>(ds.views.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    LabeledView& v = ds.views[static_cast<std::size_t>(i)];
    v.image = render(ds.objects[v.object_id], v.pose, config.render);
  }
  return ds;
}

json manifest_json(const Dataset& ds) {
  const std::size_t image_bytes = ds.height * ds.width * 3 * sizeof(double);
  json classes = json::array();
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) classes.push_back({{"id", i}, {"name", ds.class_names[i]}});
  json objects = json::array();
  for (std::size_t i = 0; i < ds.objects.size(); ++i) {
    const ShapeSpec& s = ds.objects[i];
    objects.push_back({{"object_id", i},
                       {"class_id", s.class_id},
                       {"kind", to_string(s.kind)},
                       {"size", s.size},
                       {"albedo", s.albedo},
                       {"yaw", s.yaw},
                       {"seed", s.seed}});
  }
  json records = json::array();
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    const LabeledView& v = ds.views[i];
    records.push_back({{"object_id", v.object_id},
                       {"view_id", v.view_id},
                       {"label", v.label},
                       {"split", split_tag(v.split)},
                       {"pose", {{"theta", v.pose.theta}, {"phi", v.pose.phi}, {"radius", v.pose.radius}}},
                       {"offset", i * image_bytes}});
  }
  return json{{"format", "viap-dataset-1"},
              {"seed", ds.seed},
              {"height", ds.height},
              {"width", ds.width},
              {"channels", 3},
              {"image_bytes", image_bytes},
              {"classes", classes},
              {"objects", objects},
              {"records", records}};
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  detail::ByteWriter w;
  for (const LabeledView& v : ds.views) w.f64s(v.image.data());
  detail::write_file(dir + "/" + kImageStoreFile, w.take());
  detail::write_file(dir + "/" + kManifestFile, manifest_json(ds).dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  json m;
  try {
    m = json::parse(detail::read_file(dir + "/" + kManifestFile));
  } catch (const json::exception& e) {
    throw Error("bad_file", std::string("manifest: ") + e.what());
  }
  const std::string blob = detail::read_file(dir + "/" + kImageStoreFile);
  Dataset ds;
  try {
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.height = m.at("height").get<std::size_t>();
    ds.width = m.at("width").get<std::size_t>();
    for (const json& c : m.at("classes")) ds.class_names.push_back(c.at("name").get<std::string>());
    for (const json& o : m.at("objects")) {
      ShapeSpec s;
      s.class_id = o.at("class_id").get<std::size_t>();
      s.kind = shape_kind_from_string(o.at("kind").get<std::string>());
      s.size = o.at("size").get<double>();
      s.albedo = o.at("albedo").get<Rgb>();
      s.yaw = o.at("yaw").get<double>();
      s.seed = o.at("seed").get<std::uint64_t>();
      ds.objects.push_back(s);
    }
    const std::size_t n = ds.height * ds.width * 3;
    for (const json& r : m.at("records")) {
      LabeledView v;
      v.object_id = r.at("object_id").get<std::size_t>();
      v.view_id = r.at("view_id").get<std::size_t>();
      v.label = r.at("label").get<std::size_t>();
      v.split = split_from(r.at("split").get<std::string>());
      const json& p = r.at("pose");
      v.pose = {p.at("theta").get<double>(), p.at("phi").get<double>(), p.at("radius").get<double>()};
      const std::size_t offset = r.at("offset").get<std::size_t>();
      if (offset > blob.size() || blob.size() - offset < n * sizeof(double)) {
        throw Error("bad_file", "image store truncated");
      }
      detail::ByteReader br(std::string_view(blob).substr(offset, n * sizeof(double)), "image store");
      v.image = Tensor({ds.height, ds.width, 3}, br.f64s(n));
      if (v.label >= ds.class_names.size() || v.object_id >= ds.objects.size()) {
        throw Error("bad_file", "record references unknown class or object");
      }
      ds.views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw Error("bad_file", std::string("manifest: ") + e.what());
  }
  return ds;
}

void export_ppm(const Tensor& image, const std::string& path) {
  if (image.rank() != 3 || image.extent(2) != 3) throw ShapeError("PPM export needs an [H,W,3] image");
  std::string out = "P6\n" + std::to_string(image.extent(1)) + " " + std::to_string(image.extent(0)) + "\n255\n";
  for (double v : image.data()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  detail::write_file(path, out);
}

Tensor stack_images(const std::vector<const LabeledView*>& views) {
  std::vector<Tensor> items;
  items.reserve(views.size());
  for (const LabeledView* v : views) items.push_back(v->image);
  return stack(items);
}

std::vector<std::size_t> labels_of(const std::vector<const LabeledView*>& views) {
  std::vector<std::size_t> out;
  out.reserve(views.size());
  for (const LabeledView* v : views) out.push_back(v->label);
  return out;
}

}  // namespace viap
