#include "viap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <random>

#include "internal/binary_io.hpp"
#include "internal/format.hpp"

namespace viap {

using nlohmann::json;

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t a, std::size_t b, std::size_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string eps_tag(double eps) { return detail::fmt_fixed(eps, 2); }

struct ObjectSplit {
  std::size_t object_id = 0;
  std::size_t label = 0;
  std::vector<const LabeledView*> train;
  std::vector<const LabeledView*> test;
};

struct TaskOutput {
  std::vector<ViewRecord> train;
  std::vector<ViewRecord> test;
  std::vector<SampleImage> samples;
};

std::vector<ViewRecord> score(const Model& model, const std::vector<Tensor>& adv,
                              const std::vector<const LabeledView*>& views, std::optional<std::size_t> target) {
  const Tensor probs = model.probabilities(stack(adv));
  const std::size_t K = model.num_classes();
  std::vector<ViewRecord> out;
  for (std::size_t i = 0; i < views.size(); ++i) {
    ViewRecord r;
    r.object_id = views[i]->object_id;
    r.view_id = views[i]->view_id;
    r.label = views[i]->label;
    r.target = target;
    r.tracked = probs[i * K + (target ? *target : views[i]->label)];
    r.predicted = argmax_row(probs.slice(i));
    out.push_back(r);
  }
  return out;
}

void summarize(CellResult& cell) {
  const auto values = cell.tracked_values();
  const SampleMoments m = moments(values);
  cell.mean = m.mean;
  cell.std = std::sqrt(m.variance);
  std::size_t hits = 0, target_hits = 0;
  for (const ViewRecord& r : cell.records) {
    hits += r.predicted == r.label;
    target_hits += r.target && r.predicted == *r.target;
  }
  const double n = static_cast<double>(cell.records.size());
  cell.top1_acc = static_cast<double>(hits) / n;
  cell.top1_target_acc = static_cast<double>(target_hits) / n;
}

}  // namespace

double top1_accuracy(const Model& model, const Tensor& images, std::span<const std::size_t> true_labels) {
  if (images.rank() != 4 || images.extent(0) == 0) throw Error("empty_dataset", "top-1 accuracy of no images");
  if (true_labels.size() != images.extent(0)) throw ShapeError("one label per image required");
  const Tensor logits = model.logits(images);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < images.extent(0); ++b) hits += argmax_row(logits.slice(b)) == true_labels[b];
  return static_cast<double>(hits) / static_cast<double>(images.extent(0));
}

double top1_target_accuracy(const Model& model, const Tensor& images, std::size_t target_label) {
  if (images.rank() != 4 || images.extent(0) == 0) throw Error("empty_dataset", "top-1 accuracy of no images");
  const Tensor logits = model.logits(images);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < images.extent(0); ++b) hits += argmax_row(logits.slice(b)) == target_label;
  return static_cast<double>(hits) / static_cast<double>(images.extent(0));
}

std::size_t draw_target(std::size_t true_label, std::size_t classes, std::mt19937_64& rng) {
  if (classes < 2) throw Error("bad_config", "targeted attacks need at least two classes");
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::size_t t = pick(rng);
  while (t == true_label) t = pick(rng);
  return t;
}

void SweepConfig::validate() const {
  if (families.empty()) throw Error("bad_config", "no attack families selected");
  if (eps_grid.empty()) throw Error("bad_config", "empty epsilon grid");
  for (double e : eps_grid)
    if (!(e >= 0.0) || !std::isfinite(e)) throw Error("bad_config", "epsilon values must be finite and >= 0");
  if (iterations < 1) throw Error("bad_config", "iterations must be >= 1");
}

void to_json(json& j, const SweepConfig& c) {
  json fams = json::array();
  for (AttackFamily f : c.families) fams.push_back(to_string(f));
  j = json{{"families", fams},
           {"eps_grid", c.eps_grid},
           {"iterations", c.iterations},
           {"literal_step", c.literal_step},
           {"printed_targeted_sign", c.printed_targeted_sign},
           {"init_noise", c.init_noise},
           {"target", c.fixed_target ? json(*c.fixed_target) : json("random")},
           {"ttest_epsilon", c.ttest_epsilon},
           {"ttest_variance", to_string(c.ttest_variance)},
           {"min_train_accuracy", c.min_train_accuracy},
           {"min_test_accuracy", c.min_test_accuracy},
           {"sample_object", c.sample_object},
           {"seed", c.seed}};
}

void from_json(const json& j, SweepConfig& c) {
  if (j.contains("families")) {
    c.families.clear();
    for (const json& f : j.at("families")) c.families.push_back(attack_family_from_string(f.get<std::string>()));
  }
  c.eps_grid = j.value("eps_grid", c.eps_grid);
  c.iterations = j.value("iterations", c.iterations);
  c.literal_step = j.value("literal_step", c.literal_step);
  c.printed_targeted_sign = j.value("printed_targeted_sign", c.printed_targeted_sign);
  c.init_noise = j.value("init_noise", c.init_noise);
  if (j.contains("target")) {
    const json& t = j.at("target");
    c.fixed_target = t.is_string() ? std::nullopt : std::optional<std::size_t>(t.get<std::size_t>());
  }
  c.ttest_epsilon = j.value("ttest_epsilon", c.ttest_epsilon);
  if (j.contains("ttest_variance")) {
    c.ttest_variance = variance_model_from_string(j.at("ttest_variance").get<std::string>());
  }
  c.min_train_accuracy = j.value("min_train_accuracy", c.min_train_accuracy);
  c.min_test_accuracy = j.value("min_test_accuracy", c.min_test_accuracy);
  c.sample_object = j.value("sample_object", c.sample_object);
  c.seed = j.value("seed", c.seed);
}

std::vector<double> CellResult::tracked_values() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const ViewRecord& r : records) out.push_back(r.tracked);
  return out;
}

const CellResult& SweepResult::cell(AttackFamily family, double epsilon, Split split) const {
  for (const CellResult& c : cells)
    if (c.family == family && c.epsilon == epsilon && c.split == split) return c;
  throw Error("missing_cell", "no sweep cell for " + to_string(family) + " eps=" + eps_tag(epsilon));
}

SweepResult confidence_sweep(const ModelParams& params, const Dataset& dataset, const SweepConfig& config) {
  config.validate();
  const ConvNet model(params);
  const std::size_t K = params.arch.classes;
  if (dataset.num_classes() != K) throw Error("shape_mismatch", "dataset and model disagree on class count");
  if (config.fixed_target && *config.fixed_target >= K) throw Error("bad_config", "target label out of range");

  SweepResult result;
  const auto train_views = dataset.split(Split::train);
  const auto test_views = dataset.split(Split::test);
  result.clean_train = evaluate_clean(params, train_views);
  result.clean_test = evaluate_clean(params, test_views);
  if (result.clean_train.accuracy < config.min_train_accuracy ||
      result.clean_test.accuracy < config.min_test_accuracy) {
    throw Error("gate_failed", "clean accuracy gate failed: train " + detail::fmt_fixed(result.clean_train.accuracy, 4) +
                                   " (need " + detail::fmt_fixed(config.min_train_accuracy, 2) + "), test " +
                                   detail::fmt_fixed(result.clean_test.accuracy, 4) + " (need " +
                                   detail::fmt_fixed(config.min_test_accuracy, 2) + ")");
  }

  std::vector<ObjectSplit> objects;
  for (std::size_t o = 0; o < dataset.objects.size(); ++o) {
    ObjectSplit s;
    s.object_id = o;
    s.label = dataset.objects[o].class_id;
    s.train = dataset.object_views(o, Split::train);
    s.test = dataset.object_views(o, Split::test);
    if (s.train.empty() || s.test.empty()) throw Error("bad_dataset", "object without views in both splits");
    objects.push_back(std::move(s));
  }

  std::mt19937_64 target_rng(derive_seed(config.seed, 0x7a, 0, 0));
  for (const ObjectSplit& o : objects) {
    const bool usable = config.fixed_target && *config.fixed_target != o.label;
    result.targets[o.object_id] = usable ? *config.fixed_target : draw_target(o.label, K, target_rng);
  }

  auto global_index = [&](const LabeledView* v) { return static_cast<std::size_t>(v - dataset.views.data()); };

  const std::size_t nf = config.families.size(), ne = config.eps_grid.size(), no = objects.size();
  std::vector<TaskOutput> outputs(nf * ne * no);
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic, 1)
  for (long long task = 0; task < static_cast<long long>(outputs.size()); ++task) {
    try {
      const std::size_t t = static_cast<std::size_t>(task);
      const std::size_t fi = t / (ne * no), ei = (t / no) % ne, oi = t % no;
      const AttackFamily family = config.families[fi];
      const double eps = config.eps_grid[ei];
      const ObjectSplit& obj = objects[oi];
      const bool targeted = is_targeted(family);
      const std::optional<std::size_t> target =
          targeted ? std::optional<std::size_t>(result.targets.at(obj.object_id)) : std::nullopt;

      std::vector<Tensor> adv_train, adv_test;
      if (eps == 0.0) {
        for (const LabeledView* v : obj.train) adv_train.push_back(v->image);
        for (const LabeledView* v : obj.test) adv_test.push_back(v->image);
      } else {
        AttackConfig ac;
        ac.family = family;
        ac.epsilon = eps;
        ac.iterations = config.iterations;
        ac.target = target;
        ac.init_noise = config.init_noise;
        ac.literal_step = config.literal_step;
        ac.printed_targeted_sign = config.printed_targeted_sign;
        ac.seed = derive_seed(config.seed, fi, ei, obj.object_id);
        if (is_universal(family)) {
          const Perturbation p = viap(model, obj.train, ac);
          for (const LabeledView* v : obj.train) adv_train.push_back(apply(p, v->image));
          for (const LabeledView* v : obj.test) adv_test.push_back(apply(p, v->image));
        } else {
          std::vector<Perturbation> noise;
          for (const LabeledView* v : obj.train) {
            Tensor adv = attack_image(model, v->image, v->label, ac);
            Perturbation d;
            d.delta = Tensor(adv.shape());
            for (std::size_t i = 0; i < adv.size(); ++i) d.delta[i] = adv[i] - v->image[i];
            noise.push_back(std::move(d));
            adv_train.push_back(std::move(adv));
          }
          for (std::size_t j = 0; j < obj.test.size(); ++j) {
            adv_test.push_back(apply(noise[j % noise.size()], obj.test[j]->image));
          }
        }
      }

      TaskOutput& out = outputs[t];
      out.train = score(model, adv_train, obj.train, target);
      out.test = score(model, adv_test, obj.test, target);
      if (obj.object_id == config.sample_object) {
        const std::string prefix = to_string(family) + "_" + eps_tag(eps) + "_";
        out.samples.push_back({prefix + std::to_string(global_index(obj.train[0])) + ".ppm", adv_train[0]});
        out.samples.push_back({prefix + std::to_string(global_index(obj.test[0])) + ".ppm", adv_test[0]});
      }
    } catch (...) {
#pragma omp critical(viap_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (const ObjectSplit& o : objects) {
    if (o.object_id != config.sample_object) continue;
    result.samples.push_back({"clean_" + std::to_string(global_index(o.train[0])) + ".ppm", o.train[0]->image});
    result.samples.push_back({"clean_" + std::to_string(global_index(o.test[0])) + ".ppm", o.test[0]->image});
  }
  for (std::size_t fi = 0; fi < nf; ++fi)
    for (std::size_t ei = 0; ei < ne; ++ei)
      for (Split split : {Split::train, Split::test}) {
        CellResult cell;
        cell.family = config.families[fi];
        cell.epsilon = config.eps_grid[ei];
        cell.split = split;
        for (std::size_t oi = 0; oi < no; ++oi) {
          const TaskOutput& out = outputs[(fi * ne + ei) * no + oi];
          const auto& recs = split == Split::train ? out.train : out.test;
          cell.records.insert(cell.records.end(), recs.begin(), recs.end());
          if (split == Split::train) result.samples.insert(result.samples.end(), out.samples.begin(), out.samples.end());
        }
        summarize(cell);
        result.cells.push_back(std::move(cell));
      }
  return result;
}

std::vector<TTestResult> significance_tests(const SweepResult& sweep, const SweepConfig& config) {
  const std::pair<AttackFamily, AttackFamily> pairs[] = {
      {AttackFamily::viap_targeted, AttackFamily::fgsm_targeted},
      {AttackFamily::viap_targeted, AttackFamily::bim_targeted},
      {AttackFamily::viap, AttackFamily::fgsm},
      {AttackFamily::viap, AttackFamily::bim},
  };
  auto present = [&](AttackFamily f) {
    return std::find(config.families.begin(), config.families.end(), f) != config.families.end();
  };
  const bool eps_present =
      std::find(config.eps_grid.begin(), config.eps_grid.end(), config.ttest_epsilon) != config.eps_grid.end();
  std::vector<TTestResult> out;
  if (!eps_present) return out;
  for (const auto& [a, b] : pairs) {
    if (!present(a) || !present(b)) continue;
    const auto va = sweep.cell(a, config.ttest_epsilon, Split::test).tracked_values();
    const auto vb = sweep.cell(b, config.ttest_epsilon, Split::test).tracked_values();
    try {
      TTestResult r = two_sample_ttest(va, vb, config.ttest_variance);
      r.label = to_string(a) + " vs " + to_string(b);
      out.push_back(std::move(r));
    } catch (const Error& e) {
      if (e.kind() != "undefined_statistic") throw;
    }
  }
  return out;
}

namespace {

json record_json(const ViewRecord& r) {
  return json{{"object_id", r.object_id},
              {"view_id", r.view_id},
              {"label", r.label},
              {"target", r.target ? json(*r.target) : json(nullptr)},
              {"tracked", r.tracked},
              {"predicted", r.predicted}};
}

std::string table_cell_untargeted(double v) { return std::to_string(std::llround(v * 1e6)); }
std::string table_cell_targeted(double v) { return detail::fmt_fixed(v, 2); }

struct FamilyStats {
  double mean = 0.0;
  double std = 0.0;
};

FamilyStats over_grid(const SweepResult& sweep, const SweepConfig& config, AttackFamily f, Split split) {
  std::vector<double> means;
  for (double e : config.eps_grid) means.push_back(sweep.cell(f, e, split).mean);
  const SampleMoments m = moments(means);
  return {m.mean, std::sqrt(m.variance)};
}

std::string markdown_table(const SweepResult& sweep, const SweepConfig& config,
                           const std::vector<AttackFamily>& fams, bool targeted) {
  auto fmt = targeted ? table_cell_targeted : table_cell_untargeted;
  std::string s = "| eps |";
  for (Split split : {Split::train, Split::test})
    for (AttackFamily f : fams) s += " " + to_string(split) + " " + to_string(f) + " |";
  s += "\n|---|";
  for (std::size_t i = 0; i < 2 * fams.size(); ++i) s += "---:|";
  s += "\n";
  for (double e : config.eps_grid) {
    s += "| " + eps_tag(e) + " |";
    for (Split split : {Split::train, Split::test})
      for (AttackFamily f : fams) s += " " + fmt(sweep.cell(f, e, split).mean) + " |";
    s += "\n";
  }
  for (int row = 0; row < 2; ++row) {
    s += row == 0 ? "| Mean |" : "| Std |";
    for (Split split : {Split::train, Split::test})
      for (AttackFamily f : fams) {
        const FamilyStats st = over_grid(sweep, config, f, split);
        s += " " + fmt(row == 0 ? st.mean : st.std) + " |";
      }
    s += "\n";
  }
  return s;
}

}  // namespace

std::vector<std::string> emit_report(const SweepResult& sweep, const std::vector<TTestResult>& ttests,
                                     const SweepConfig& config, const std::string& config_echo,
                                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    detail::write_file((fs::path(out_dir) / name).string(), content);
    written.push_back(name);
  };

  std::string confidence = "family,epsilon,split,metric,mean,std,n\n";
  std::string top1 = "family,epsilon,split,metric,mean,std,n\n";
  json cells = json::array();
  for (const CellResult& c : sweep.cells) {
    const std::string key = to_string(c.family) + "," + detail::fmt_double(c.epsilon) + "," + to_string(c.split);
    const std::string n = std::to_string(c.records.size());
    confidence += key + "," + c.metric() + "," + detail::fmt_double(c.mean) + "," + detail::fmt_double(c.std) + "," +
                  n + "\n";
    auto binomial_std = [&](double p) {
      const double m = static_cast<double>(c.records.size());
      return m > 1 ? std::sqrt(p * (1.0 - p) * m / (m - 1.0)) : 0.0;
    };
    top1 += key + ",top1_acc," + detail::fmt_double(c.top1_acc) + "," + detail::fmt_double(binomial_std(c.top1_acc)) +
            "," + n + "\n";
    if (is_targeted(c.family)) {
      top1 += key + ",top1_target_acc," + detail::fmt_double(c.top1_target_acc) + "," +
              detail::fmt_double(binomial_std(c.top1_target_acc)) + "," + n + "\n";
    }
    json recs = json::array();
    for (const ViewRecord& r : c.records) recs.push_back(record_json(r));
    cells.push_back({{"family", to_string(c.family)},
                     {"epsilon", c.epsilon},
                     {"split", to_string(c.split)},
                     {"metric", c.metric()},
                     {"mean", c.mean},
                     {"std", c.std},
                     {"n", c.records.size()},
                     {"top1_acc", c.top1_acc},
                     {"top1_target_acc", is_targeted(c.family) ? json(c.top1_target_acc) : json(nullptr)},
                     {"records", recs}});
  }

  std::string summary = "family,split,metric,mean,std,n\n";
  json summary_json = json::array();
  for (AttackFamily f : config.families)
    for (Split split : {Split::train, Split::test}) {
      const FamilyStats st = over_grid(sweep, config, f, split);
      const std::string metric = is_targeted(f) ? "target_softmax" : "true_softmax";
      summary += to_string(f) + "," + to_string(split) + "," + metric + "," + detail::fmt_double(st.mean) + "," +
                 detail::fmt_double(st.std) + "," + std::to_string(config.eps_grid.size()) + "\n";
      summary_json.push_back({{"family", to_string(f)},
                              {"split", to_string(split)},
                              {"metric", metric},
                              {"mean", st.mean},
                              {"std", st.std},
                              {"n", config.eps_grid.size()}});
    }

  json targets = json::array();
  for (const auto& [object, target] : sweep.targets) targets.push_back({{"object_id", object}, {"target", target}});
  const json doc{{"clean",
                  {{"train", {{"accuracy", sweep.clean_train.accuracy}, {"mean_true_softmax", sweep.clean_train.mean_true_softmax}}},
                   {"test", {{"accuracy", sweep.clean_test.accuracy}, {"mean_true_softmax", sweep.clean_test.mean_true_softmax}}}}},
                 {"targets", targets},
                 {"cells", cells},
                 {"summary", summary_json}};

  put("config.json", config_echo);
  put("confidence.csv", confidence);
  put("top1.csv", top1);
  put("summary.csv", summary);
  put("sweep.json", doc.dump(1) + "\n");

  if (!ttests.empty()) {
    std::string csv = "pair,epsilon,split,variance,t,df,p,n_a,n_b\n";
    json arr = json::array();
    for (const TTestResult& t : ttests) {
      csv += t.label + "," + detail::fmt_double(config.ttest_epsilon) + ",test," + to_string(t.model) + "," +
             detail::fmt_double(t.t) + "," + detail::fmt_double(t.df) + "," + detail::fmt_double(t.p) + "," +
             std::to_string(t.n_a) + "," + std::to_string(t.n_b) + "\n";
      arr.push_back({{"pair", t.label},
                     {"epsilon", config.ttest_epsilon},
                     {"split", "test"},
                     {"variance", to_string(t.model)},
                     {"t", t.t},
                     {"df", t.df},
                     {"p", t.p},
                     {"n_a", t.n_a},
                     {"n_b", t.n_b}});
    }
    put("ttests.csv", csv);
    put("ttests.json", arr.dump(1) + "\n");
  }

  std::vector<AttackFamily> untargeted, targeted;
  for (AttackFamily f : config.families) (is_targeted(f) ? targeted : untargeted).push_back(f);
  std::string md = "# Attack sweep report\n\n";
  md += "Clean top-1 accuracy: train " + detail::fmt_fixed(sweep.clean_train.accuracy, 4) + ", test " +
        detail::fmt_fixed(sweep.clean_test.accuracy, 4) + ". Mean true-label softmax: train " +
        detail::fmt_fixed(sweep.clean_train.mean_true_softmax, 6) + ", test " +
        detail::fmt_fixed(sweep.clean_test.mean_true_softmax, 6) + ".\n\n";
  md += "Perturbations are crafted on the train split only. Epsilon is on the 0-255 pixel scale; iterative "
        "attacks run " + std::to_string(config.iterations) + " iterations.\n\n";
  if (!untargeted.empty()) {
    md += "## Untargeted: mean softmax of the true label (x 1e-6, lower is stronger)\n\n";
    md += markdown_table(sweep, config, untargeted, false) + "\n";
  }
  if (!targeted.empty()) {
    md += "## Targeted: mean softmax of the target label (higher is stronger)\n\n";
    md += markdown_table(sweep, config, targeted, true) + "\n";
  }
  if (!ttests.empty()) {
    md += "## Two-sample t-tests\n\n| pair | t | df | p |\n|---|---:|---:|---:|\n";
    for (const TTestResult& t : ttests) {
      md += "| " + t.label + " | " + detail::fmt_fixed(t.t, 4) + " | " + detail::fmt_fixed(t.df, 2) + " | " +
            detail::fmt_fixed(t.p, 6) + " |\n";
    }
    md += "\n";
  }
  md += "Notes:\n\n";
  md += "1. eps = 0 rows are the clean images for every family. VIAP's random start is not applied there, so its "
        "eps = 0 entry equals the clean baseline.\n";
  md += "2. Std rows and per-cell std use the sample standard deviation (n - 1). Mean/Std rows aggregate the "
        "per-epsilon means, eps = 0 included.\n";
  md += "3. t-test samples are the per-view tracked softmax values on the test split at eps = " +
        detail::fmt_fixed(config.ttest_epsilon, 2) + ", using the " + to_string(config.ttest_variance) +
        " variance model.\n";
  md += "4. Per-image attacks (FGSM, BIM) are evaluated on test views by adding the noise crafted for a train view "
        "of the same object.\n";
  put("report.md", md);

  for (const SampleImage& s : sweep.samples) {
    export_ppm(s.image, (fs::path(out_dir) / "images" / s.file_name).string());
    written.push_back("images/" + s.file_name);
  }
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace viap
