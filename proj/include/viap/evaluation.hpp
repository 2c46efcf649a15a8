#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viap/attacks.hpp"
#include "viap/classifier.hpp"
#include "viap/dataset.hpp"
#include "viap/stats.hpp"

namespace viap {

/// (# argmax == label) / n.
double top1_accuracy(const Model& model, const Tensor& images, std::span<const std::size_t> true_labels);
/// (# argmax == target) / n.
double top1_target_accuracy(const Model& model, const Tensor& images, std::size_t target_label);

/// Uniform draw from [0, classes) excluding `true_label`, redrawing on a hit.
std::size_t draw_target(std::size_t true_label, std::size_t classes, std::mt19937_64& rng);

struct SweepConfig {
  std::vector<AttackFamily> families = {AttackFamily::fgsm,         AttackFamily::bim,
                                        AttackFamily::viap,         AttackFamily::fgsm_targeted,
                                        AttackFamily::bim_targeted, AttackFamily::viap_targeted};
  std::vector<double> eps_grid = {0.0, 0.5, 1.0, 3.0, 5.0, 10.0, 15.0, 30.0, 50.0};
  std::size_t iterations = 20;
  bool literal_step = false;
  bool printed_targeted_sign = false;
  double init_noise = 0.01;
  std::optional<std::size_t> fixed_target;  // unset: random per object
  double ttest_epsilon = 5.0;
  VarianceModel ttest_variance = VarianceModel::welch;
  double min_train_accuracy = 0.95;
  double min_test_accuracy = 0.90;
  std::size_t sample_object = 0;  // whose first train and test view are dumped as images
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const SweepConfig& c);
void from_json(const nlohmann::json& j, SweepConfig& c);

struct ViewRecord {
  std::size_t object_id = 0;
  std::size_t view_id = 0;
  std::size_t label = 0;
  std::optional<std::size_t> target;
  double tracked = 0.0;  // softmax of the true label (untargeted) or of the target
  std::size_t predicted = 0;
};

/// One (family, epsilon, split) cell of the confidence tables.
struct CellResult {
  AttackFamily family = AttackFamily::fgsm;
  double epsilon = 0.0;
  Split split = Split::train;
  std::vector<ViewRecord> records;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double top1_acc = 0.0;
  double top1_target_acc = 0.0;  // targeted families only

  std::vector<double> tracked_values() const;
  std::string metric() const { return is_targeted(family) ? "target_softmax" : "true_softmax"; }
};

struct SampleImage {
  std::string file_name;
  Tensor image;
};

struct SweepResult {
  CleanEval clean_train;
  CleanEval clean_test;
  std::map<std::size_t, std::size_t> targets;  // object_id -> target label
  std::vector<CellResult> cells;              // family-major, then epsilon, then split
  std::vector<SampleImage> samples;

  const CellResult& cell(AttackFamily family, double epsilon, Split split) const;
};

/// Crafts every family at every epsilon on the train split and evaluates on
/// both splits. Universal families build one delta per object from its train
/// views; per-image families attack each train view, and each test view
/// reuses the noise (adv - clean) of a train view of the same object.
/// Throws Error("gate_failed") if the clean accuracy gate is not met.
SweepResult confidence_sweep(const ModelParams& params, const Dataset& dataset, const SweepConfig& config);

/// Significance comparisons on the test split at config.ttest_epsilon:
/// VIAP-T against FGSM-T and BIM-T, and VIAP against FGSM and BIM, for the
/// families present. Pairs whose statistic is undefined are skipped.
std::vector<TTestResult> significance_tests(const SweepResult& sweep, const SweepConfig& config);

/// Writes the report files into `out_dir` and returns their names, sorted:
///   confidence.csv  one row per (family, epsilon, split), tracked softmax
///   top1.csv        top-1 and top-1-target accuracies per cell
///   summary.csv     per-family mean/std over the epsilon grid
///   sweep.json      everything above plus raw per-view records
///   report.md       markdown tables of the above
///   ttests.csv, ttests.json   only when `ttests` is non-empty
///   config.json     `config_echo` verbatim
///   images/*.ppm    clean and attacked sample views
std::vector<std::string> emit_report(const SweepResult& sweep, const std::vector<TTestResult>& ttests,
                                     const SweepConfig& config, const std::string& config_echo,
                                     const std::string& out_dir);

}  // namespace viap
