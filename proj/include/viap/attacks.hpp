#pragma once

#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "viap/dataset.hpp"
#include "viap/network.hpp"

namespace viap {

enum class AttackFamily { fgsm, fgsm_targeted, bim, bim_targeted, viap, viap_targeted };

/// Names used in configs, reports and file names: FGSM, FGSM-T, BIM, BIM-T,
/// VIAP, VIAP-T.
std::string to_string(AttackFamily family);
AttackFamily attack_family_from_string(const std::string& name);
bool is_targeted(AttackFamily family);
bool is_iterative(AttackFamily family);
bool is_universal(AttackFamily family);

/// Epsilon and step are on the 0-255 pixel scale; images live in [0,1], so
/// the attacks work with epsilon / 255.
struct AttackConfig {
  AttackFamily family = AttackFamily::viap;
  double epsilon = 5.0;
  std::optional<double> step;  // unset: max(2.5 * epsilon / iterations, 0.5)
  std::size_t iterations = 20;
  std::optional<std::size_t> target;
  double init_noise = 0.01;    // VIAP start amplitude, in [0,1] image units
  std::uint64_t seed = 0;
  bool literal_step = false;   // step = epsilon
  bool printed_targeted_sign = false;  // FGSM-T adds instead of subtracts

  double epsilon_unit() const { return epsilon / 255.0; }
  double step_unit() const;
  std::size_t effective_iterations() const { return is_iterative(family) ? iterations : 1; }
  void validate() const;
};

void to_json(nlohmann::json& j, const AttackConfig& c);
void from_json(const nlohmann::json& j, AttackConfig& c);

/// A universal additive noise field for one image shape.
struct Perturbation {
  Tensor delta;  // [H,W,C], |delta| <= epsilon / 255 everywhere
  AttackConfig config;
  std::vector<std::pair<std::size_t, std::size_t>> training_views;  // (object_id, view_id)
  double final_loss = 0.0;
};

/// Called after every update with the iteration number (1-based), the sign
/// direction that was applied, and the new iterate (the adversarial image
/// for BIM, delta for VIAP).
using IterationObserver = std::function<void(std::size_t, const Tensor& direction, const Tensor& iterate)>;

/// min(max(adv, clean - eps, 0), clean + eps, 1), elementwise.
Tensor clip_ball(const Tensor& adv, const Tensor& clean, double eps);

/// clamp(X + eps * sign(grad_X J(X, label)), 0, 1).
Tensor fgsm(const Model& model, const Tensor& image, std::size_t label, double eps);

/// clamp(X - eps * sign(grad_X J(X, target)), 0, 1); with `printed_sign`
/// the step is added instead.
Tensor fgsm_targeted(const Model& model, const Tensor& image, std::size_t target, double eps,
                     bool printed_sign = false);

/// Iterated sign steps with clip_ball after each one. For BIM-T the label
/// is config.target and the step descends its loss.
Tensor bim(const Model& model, const Tensor& image, std::size_t true_label, const AttackConfig& config,
           const IterationObserver& observer = {});

/// Dispatches a per-image family (FGSM, FGSM-T, BIM, BIM-T).
Tensor attack_image(const Model& model, const Tensor& image, std::size_t true_label, const AttackConfig& config);

/// One delta for a batch of views [B,H,W,C]. Each iteration takes the sign
/// of the gradient of the mean batch loss with respect to delta, steps
/// (ascending for VIAP, descending towards config.target for VIAP-T) and
/// clamps delta to [-eps, eps].
Perturbation viap(const Model& model, const Tensor& images, std::span<const std::size_t> true_labels,
                  const AttackConfig& config, const IterationObserver& observer = {});

Perturbation viap(const Model& model, const std::vector<const LabeledView*>& views, const AttackConfig& config,
                  const IterationObserver& observer = {});

/// clamp(X + delta, 0, 1).
Tensor apply(const Perturbation& perturbation, const Tensor& image);

/// Perturbation file: "VIAPDLT1", u64 length of a JSON header (config, shape,
/// training views, final loss), the header, then the raw little-endian f64
/// delta payload.
inline constexpr std::string_view kPerturbationMagic = "VIAPDLT1";

std::string encode_perturbation(const Perturbation& p);
Perturbation decode_perturbation(std::string_view bytes);
void save_perturbation(const Perturbation& p, const std::string& path);
Perturbation load_perturbation(const std::string& path);

}  // namespace viap
