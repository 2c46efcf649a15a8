#include "viap/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "internal/binary_io.hpp"

namespace viap {

using nlohmann::json;

namespace {

struct FamilyName {
  AttackFamily family;
  const char* name;
};

constexpr FamilyName kFamilies[] = {
    {AttackFamily::fgsm, "FGSM"}, {AttackFamily::fgsm_targeted, "FGSM-T"}, {AttackFamily::bim, "BIM"},
    {AttackFamily::bim_targeted, "BIM-T"}, {AttackFamily::viap, "VIAP"}, {AttackFamily::viap_targeted, "VIAP-T"},
};

Tensor sign_of(const Tensor& g, double scale) {
  Tensor out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = scale * sign(g[i]);
  return out;
}

void require_image(const Model& model, const Tensor& image) {
  if (image.shape() != model.image_shape()) {
    throw ShapeError("image shape " + shape_string(image.shape()) + " does not match model input " +
                     shape_string(model.image_shape()));
  }
}

Tensor input_grad(const Model& model, const Tensor& image, std::size_t label) {
  Shape batched{1};
  batched.insert(batched.end(), image.shape().begin(), image.shape().end());
  const std::size_t labels[] = {label};
  return model.loss_and_input_grad(image.reshaped(batched), labels).grad.reshaped(image.shape());
}

std::size_t require_target(const AttackConfig& c) {
  if (!c.target) throw Error("missing_target", to_string(c.family) + " needs a target label");
  return *c.target;
}

}  // namespace

std::string to_string(AttackFamily family) {
  for (const auto& f : kFamilies)
    if (f.family == family) return f.name;
  return "unknown";
}

AttackFamily attack_family_from_string(const std::string& name) {
  for (const auto& f : kFamilies)
    if (name == f.name) return f.family;
  throw Error("bad_config", "unknown attack family '" + name + "'");
}

bool is_targeted(AttackFamily f) {
  return f == AttackFamily::fgsm_targeted || f == AttackFamily::bim_targeted || f == AttackFamily::viap_targeted;
}

bool is_iterative(AttackFamily f) { return f != AttackFamily::fgsm && f != AttackFamily::fgsm_targeted; }

bool is_universal(AttackFamily f) { return f == AttackFamily::viap || f == AttackFamily::viap_targeted; }

double AttackConfig::step_unit() const {
  if (literal_step) return epsilon_unit();
  if (step) return *step / 255.0;
  const double n = static_cast<double>(std::max<std::size_t>(effective_iterations(), 1));
  return std::max(2.5 * epsilon / n, 0.5) / 255.0;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw Error("bad_config", "epsilon must be >= 0");
  if (step && !(*step > 0.0)) throw Error("bad_config", "step must be > 0");
  if (is_iterative(family) && iterations < 1) throw Error("bad_config", "iterative attacks need iterations >= 1");
  if (!(init_noise >= 0.0)) throw Error("bad_config", "init_noise must be >= 0");
  if (is_targeted(family) && !target) throw Error("missing_target", to_string(family) + " needs a target label");
}

void to_json(json& j, const AttackConfig& c) {
  j = json{{"family", to_string(c.family)},
           {"epsilon", c.epsilon},
           {"step", c.step ? json(*c.step) : json(nullptr)},
           {"iterations", c.effective_iterations()},
           {"target", c.target ? json(*c.target) : json(nullptr)},
           {"init_noise", c.init_noise},
           {"seed", c.seed},
           {"literal_step", c.literal_step},
           {"printed_targeted_sign", c.printed_targeted_sign}};
}

void from_json(const json& j, AttackConfig& c) {
  c.family = attack_family_from_string(j.at("family").get<std::string>());
  c.epsilon = j.value("epsilon", c.epsilon);
  if (j.contains("step") && !j.at("step").is_null()) c.step = j.at("step").get<double>();
  c.iterations = j.value("iterations", c.iterations);
  if (j.contains("target") && !j.at("target").is_null()) c.target = j.at("target").get<std::size_t>();
  c.init_noise = j.value("init_noise", c.init_noise);
  c.seed = j.value("seed", c.seed);
  c.literal_step = j.value("literal_step", c.literal_step);
  c.printed_targeted_sign = j.value("printed_targeted_sign", c.printed_targeted_sign);
}

Tensor clip_ball(const Tensor& adv, const Tensor& clean, double eps) {
  if (adv.shape() != clean.shape()) throw ShapeError("clip_ball of unequal shapes");
  Tensor out(adv.shape());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    out[i] = std::min({std::max({adv[i], clean[i] - eps, 0.0}), clean[i] + eps, 1.0});
  }
  return out;
}

Tensor fgsm(const Model& model, const Tensor& image, std::size_t label, double eps) {
  require_image(model, image);
  const Tensor g = input_grad(model, image, label);
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = std::clamp(image[i] + eps * sign(g[i]), 0.0, 1.0);
  return out;
}

Tensor fgsm_targeted(const Model& model, const Tensor& image, std::size_t target, double eps, bool printed_sign) {
  require_image(model, image);
  const Tensor g = input_grad(model, image, target);
  const double dir = printed_sign ? 1.0 : -1.0;
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = std::clamp(image[i] + dir * eps * sign(g[i]), 0.0, 1.0);
  return out;
}

Tensor bim(const Model& model, const Tensor& image, std::size_t true_label, const AttackConfig& config,
           const IterationObserver& observer) {
  config.validate();
  require_image(model, image);
  const bool targeted = is_targeted(config.family);
  const std::size_t label = targeted ? require_target(config) : true_label;
  const double eps = config.epsilon_unit(), step = config.step_unit();
  const double dir = targeted ? -1.0 : 1.0;
  Tensor adv = image;
  for (std::size_t n = 1; n <= config.effective_iterations(); ++n) {
    const Tensor direction = sign_of(input_grad(model, adv, label), dir);
    Tensor moved(adv.shape());
    for (std::size_t i = 0; i < adv.size(); ++i) moved[i] = adv[i] + step * direction[i];
    adv = clip_ball(moved, image, eps);
    if (observer) observer(n, direction, adv);
  }
  return adv;
}

Tensor attack_image(const Model& model, const Tensor& image, std::size_t true_label, const AttackConfig& config) {
  config.validate();
  switch (config.family) {
    case AttackFamily::fgsm: return fgsm(model, image, true_label, config.epsilon_unit());
    case AttackFamily::fgsm_targeted:
      return fgsm_targeted(model, image, require_target(config), config.epsilon_unit(),
                           config.printed_targeted_sign);
    case AttackFamily::bim:
    case AttackFamily::bim_targeted: return bim(model, image, true_label, config);
    case AttackFamily::viap:
    case AttackFamily::viap_targeted: break;
  }
  throw Error("bad_config", to_string(config.family) + " is not a per-image attack");
}

Perturbation viap(const Model& model, const Tensor& images, std::span<const std::size_t> true_labels,
                  const AttackConfig& config, const IterationObserver& observer) {
  config.validate();
  if (!is_universal(config.family)) throw Error("bad_config", to_string(config.family) + " is not a VIAP family");
  if (images.rank() != 4 || images.extent(0) == 0) throw Error("empty_views", "VIAP needs at least one view");
  const Shape image_shape(images.shape().begin() + 1, images.shape().end());
  if (image_shape != model.image_shape()) throw ShapeError("view shape does not match the model input");
  if (true_labels.size() != images.extent(0)) throw ShapeError("one label per view required");

  const bool targeted = config.family == AttackFamily::viap_targeted;
  std::vector<std::size_t> labels(true_labels.begin(), true_labels.end());
  if (targeted) std::fill(labels.begin(), labels.end(), require_target(config));
  const double eps = config.epsilon_unit(), step = config.step_unit();
  const double dir = targeted ? -1.0 : 1.0;

  Perturbation p;
  p.config = config;
  p.delta = Tensor(image_shape);
  if (config.init_noise > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u(-config.init_noise, config.init_noise);
    for (double& v : p.delta.data()) v = std::clamp(u(rng), -eps, eps);
  }
  for (std::size_t n = 1; n <= config.effective_iterations(); ++n) {
    const LossGrad lg = model.loss_and_shared_grad(images, p.delta, labels);
    const Tensor direction = sign_of(lg.grad, dir);
    for (std::size_t i = 0; i < p.delta.size(); ++i) {
      p.delta[i] = std::clamp(p.delta[i] + step * direction[i], -eps, eps);
    }
    if (observer) observer(n, direction, p.delta);
  }
  p.final_loss = model.loss_and_shared_grad(images, p.delta, labels).loss;
  return p;
}

Perturbation viap(const Model& model, const std::vector<const LabeledView*>& views, const AttackConfig& config,
                  const IterationObserver& observer) {
  if (views.empty()) throw Error("empty_views", "VIAP needs at least one view");
  Perturbation p = viap(model, stack_images(views), labels_of(views), config, observer);
  for (const LabeledView* v : views) p.training_views.emplace_back(v->object_id, v->view_id);
  return p;
}

Tensor apply(const Perturbation& perturbation, const Tensor& image) {
  if (image.shape() != perturbation.delta.shape()) {
    throw ShapeError("perturbation shape " + shape_string(perturbation.delta.shape()) + " does not match image " +
                     shape_string(image.shape()));
  }
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = std::clamp(image[i] + perturbation.delta[i], 0.0, 1.0);
  return out;
}

std::string encode_perturbation(const Perturbation& p) {
  json header{{"config", p.config},
              {"shape", p.delta.shape()},
              {"training_views", p.training_views},
              {"final_loss", p.final_loss}};
  const std::string text = header.dump();
  detail::ByteWriter w;
  w.raw(kPerturbationMagic);
  w.uint<std::uint64_t>(text.size());
  w.raw(text);
  w.f64s(p.delta.data());
  return w.take();
}

Perturbation decode_perturbation(std::string_view bytes) {
  detail::ByteReader r(bytes, "perturbation file");
  if (r.raw(kPerturbationMagic.size()) != kPerturbationMagic) r.fail("bad magic");
  const auto len = r.uint<std::uint64_t>();
  if (len > bytes.size()) r.fail("header length exceeds file size");
  Perturbation p;
  try {
    const json header = json::parse(r.raw(static_cast<std::size_t>(len)));
    p.config = header.at("config").get<AttackConfig>();
    const Shape shape = header.at("shape").get<Shape>();
    p.training_views = header.at("training_views").get<std::vector<std::pair<std::size_t, std::size_t>>>();
    p.final_loss = header.at("final_loss").get<double>();
    p.delta = Tensor(shape, r.f64s(shape_size(shape)));
  } catch (const json::exception& e) {
    r.fail(std::string("bad header: ") + e.what());
  }
  if (!r.done()) r.fail("trailing bytes after payload");
  return p;
}

void save_perturbation(const Perturbation& p, const std::string& path) {
  detail::write_file(path, encode_perturbation(p));
}

Perturbation load_perturbation(const std::string& path) { return decode_perturbation(detail::read_file(path)); }

}  // namespace viap
