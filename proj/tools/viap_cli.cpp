// viap: dataset | train | attack | sweep | verify
#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "viap/model_io.hpp"
#include "viap/run_config.hpp"
#include "viap/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string eps;
  std::optional<std::size_t> iters;
  std::string family;
  std::string target;
  std::string out;
  std::optional<int> jobs;
  bool literal_step = false;
  std::string data;
  std::string model;
  std::optional<std::size_t> object;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw viap::Error("io_error", "cannot write " + path.string());
}

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", eps);
  return buf;
}

std::string echo(const json& j) { return j.dump(2) + "\n"; }

void print_config(const std::string& command, const json& config) {
  std::cout << json{{"command", command}, {"config", config}}.dump(2) << "\n";
}

fs::path require_out(const Flags& f) {
  if (f.out.empty()) throw viap::Error("missing_input", "--out DIR is required");
  fs::create_directories(f.out);
  return f.out;
}

viap::RunConfig build_config(const Flags& f) {
  viap::RunConfig c = f.config.empty() ? viap::RunConfig{} : viap::load_run_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.eps.empty()) c.sweep.eps_grid = viap::parse_number_list(f.eps);
  if (f.iters) c.sweep.iterations = *f.iters;
  if (f.literal_step) c.sweep.literal_step = true;
  if (!f.target.empty()) {
    std::vector<std::string> names;
    for (const auto& cs : c.dataset.classes) names.push_back(cs.name);
    c.sweep.fixed_target = viap::parse_target(f.target, names);
  }
  if (!f.family.empty()) {
    const auto fams = viap::parse_family_list(f.family);
    c.sweep.families = fams;
    c.attack_family = fams.front();
  }
  if (f.object) c.attack_object = f.object;
  c.resolve();
  c.validate();
  return c;
}

int cmd_dataset(const Flags& f) {
  const viap::RunConfig c = build_config(f);
  print_config("dataset", c.dataset);
  const fs::path out = require_out(f);
  const viap::Dataset ds = viap::generate_dataset(c.dataset);
  viap::save_dataset(ds, out.string());
  write_text(out / "config.json", echo(c.dataset));
  std::cout << json{{"views", ds.views.size()},
                    {"train", ds.split(viap::Split::train).size()},
                    {"test", ds.split(viap::Split::test).size()},
                    {"out", out.string()}}
                   .dump()
            << "\n";
  return 0;
}

viap::Dataset require_dataset(const Flags& f) {
  if (f.data.empty()) throw viap::Error("missing_input", "--data DIR is required");
  return viap::load_dataset(f.data);
}

int cmd_train(const Flags& f) {
  const viap::RunConfig c = build_config(f);
  print_config("train", c.train);
  const viap::Dataset ds = require_dataset(f);
  const fs::path out = require_out(f);
  viap::Architecture arch{ds.height, ds.width, 3, ds.num_classes()};
  const auto result = viap::train(viap::init_params(arch, c.train.seed), ds.split(viap::Split::train),
                                  ds.split(viap::Split::test), c.train);
  viap::save_params(result.params, (out / "model.bin").string());
  write_text(out / "train_log.csv", viap::train_log_csv(result));
  write_text(out / "config.json", echo(c.train));
  const auto& last = result.log.back();
  std::cout << json{{"initial_loss", result.initial_loss},
                    {"final_loss", last.loss},
                    {"train_acc", last.train_acc},
                    {"test_acc", last.test_acc}}
                   .dump()
            << "\n";
  return 0;
}

json view_json(const viap::LabeledView& v, const viap::Tensor& probs_row_src, std::size_t row, std::size_t K,
               std::optional<std::size_t> target) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (probs_row_src[row * K + k] > probs_row_src[row * K + best]) best = k;
  return json{{"object_id", v.object_id},
              {"view_id", v.view_id},
              {"split", viap::to_string(v.split)},
              {"label", v.label},
              {"target", target ? json(*target) : json(nullptr)},
              {"tracked", probs_row_src[row * K + (target ? *target : v.label)]},
              {"predicted", best}};
}

int cmd_attack(const Flags& f) {
  viap::RunConfig c = build_config(f);
  const viap::Dataset ds = require_dataset(f);
  if (f.model.empty()) throw viap::Error("missing_input", "--model FILE is required");
  const viap::ModelParams params = viap::load_params(f.model);
  const viap::ConvNet model(params);
  const std::size_t K = params.arch.classes;
  if (ds.num_classes() != K) throw viap::Error("shape_mismatch", "dataset and model disagree on class count");

  json config{{"family", viap::to_string(c.attack_family)},
              {"eps", c.sweep.eps_grid},
              {"iterations", c.sweep.iterations},
              {"literal_step", c.sweep.literal_step},
              {"init_noise", c.sweep.init_noise},
              {"target", c.sweep.fixed_target ? json(*c.sweep.fixed_target) : json("random")},
              {"object", c.attack_object ? json(*c.attack_object) : json("all")},
              {"seed", c.seed}};
  print_config("attack", config);
  const fs::path out = require_out(f);

  std::vector<std::size_t> objects;
  if (c.attack_object) {
    if (*c.attack_object >= ds.objects.size()) throw viap::Error("bad_config", "object id out of range");
    objects.push_back(*c.attack_object);
  } else {
    for (std::size_t o = 0; o < ds.objects.size(); ++o) objects.push_back(o);
  }

  std::mt19937_64 target_rng(c.seed);
  json records = json::array();
  for (std::size_t o : objects) {
    const std::size_t label = ds.objects[o].class_id;
    std::optional<std::size_t> target;
    if (viap::is_targeted(c.attack_family)) {
      const bool usable = c.sweep.fixed_target && *c.sweep.fixed_target != label;
      target = usable ? *c.sweep.fixed_target : viap::draw_target(label, K, target_rng);
    }
    const auto train_views = ds.object_views(o, viap::Split::train);
    const auto test_views = ds.object_views(o, viap::Split::test);
    for (double eps : c.sweep.eps_grid) {
      viap::AttackConfig ac;
      ac.family = c.attack_family;
      ac.epsilon = eps;
      ac.iterations = c.sweep.iterations;
      ac.target = target;
      ac.init_noise = c.sweep.init_noise;
      ac.literal_step = c.sweep.literal_step;
      ac.printed_targeted_sign = c.sweep.printed_targeted_sign;
      ac.seed = c.seed + o;
      const std::string tag = viap::to_string(c.attack_family) + "_" + eps_tag(eps);

      std::vector<const viap::LabeledView*> views;
      std::vector<viap::Tensor> adv;
      if (viap::is_universal(c.attack_family)) {
        const viap::Perturbation p = viap::viap(model, train_views, ac);
        viap::save_perturbation(p, (out / (tag + "_object" + std::to_string(o) + ".delta")).string());
        for (const auto* v : train_views) adv.push_back(viap::apply(p, v->image));
        for (const auto* v : test_views) adv.push_back(viap::apply(p, v->image));
      } else {
        std::vector<viap::Perturbation> noise;
        for (const auto* v : train_views) {
          viap::Tensor a = viap::attack_image(model, v->image, v->label, ac);
          viap::Perturbation d;
          d.delta = viap::Tensor(a.shape());
          for (std::size_t i = 0; i < a.size(); ++i) d.delta[i] = a[i] - v->image[i];
          noise.push_back(std::move(d));
          adv.push_back(std::move(a));
        }
        for (std::size_t j = 0; j < test_views.size(); ++j)
          adv.push_back(viap::apply(noise[j % noise.size()], test_views[j]->image));
      }
      views = train_views;
      views.insert(views.end(), test_views.begin(), test_views.end());
      const viap::Tensor probs = model.probabilities(viap::stack(adv));
      for (std::size_t i = 0; i < views.size(); ++i) {
        json r = view_json(*views[i], probs, i, K, target);
        r["family"] = viap::to_string(c.attack_family);
        r["epsilon"] = eps;
        records.push_back(r);
        const std::size_t global = static_cast<std::size_t>(views[i] - ds.views.data());
        viap::export_ppm(adv[i], (out / (tag + "_" + std::to_string(global) + ".ppm")).string());
      }
    }
  }
  write_text(out / "attack.json", records.dump(1) + "\n");
  write_text(out / "config.json", echo(config));
  std::cout << json{{"records", records.size()}, {"out", out.string()}}.dump() << "\n";
  return 0;
}

int cmd_sweep(const Flags& f) {
  const viap::RunConfig c = build_config(f);
  json config{{"seed", c.seed}, {"dataset", c.dataset}, {"train", c.train}, {"sweep", c.sweep}};
  print_config("sweep", config);
  const fs::path out = require_out(f);
  const viap::Dataset ds = viap::generate_dataset(c.dataset);
  viap::Architecture arch{ds.height, ds.width, 3, ds.num_classes()};
  const auto trained = viap::train(viap::init_params(arch, c.train.seed), ds.split(viap::Split::train),
                                   ds.split(viap::Split::test), c.train);
  const viap::SweepResult sweep = viap::confidence_sweep(trained.params, ds, c.sweep);
  const auto ttests = viap::significance_tests(sweep, c.sweep);
  const auto files = viap::emit_report(sweep, ttests, c.sweep, echo(config), out.string());
  std::cout << json{{"clean_train_acc", sweep.clean_train.accuracy},
                    {"clean_test_acc", sweep.clean_test.accuracy},
                    {"files", files.size()},
                    {"out", out.string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_verify(const Flags& f) {
  const std::uint64_t seed = f.seed.value_or(7);
  print_config("verify", json{{"seed", seed}});
  bool all = true;
  for (const viap::CheckResult& r : viap::run_invariant_suite(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  std::cout << json{{"passed", all}}.dump() << "\n";
  return all ? 0 : 1;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-invariant adversarial perturbations: dataset, training, attacks and sweeps"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "global seed");
    sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto attack_flags = [&](CLI::App* sub) {
    sub->add_option("--eps", f.eps, "epsilon list on the 0-255 scale, comma separated");
    sub->add_option("--iters", f.iters, "iterations of BIM and VIAP (default 20)");
    sub->add_option("--family", f.family, "FGSM, FGSM-T, BIM, BIM-T, VIAP or VIAP-T");
    sub->add_option("--target", f.target, "target class id or name, or 'random'");
    sub->add_flag("--literal-eq-step", f.literal_step, "use step = epsilon");
  };

  auto* dataset = app.add_subcommand("dataset", "render the multi-view dataset");
  common(dataset);
  dataset->add_option("--out", f.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the classifier");
  common(train);
  train->add_option("--data", f.data, "dataset directory")->required();
  train->add_option("--out", f.out, "output directory")->required();

  auto* attack = app.add_subcommand("attack", "craft adversarial views for one family");
  common(attack);
  attack_flags(attack);
  attack->add_option("--data", f.data, "dataset directory")->required();
  attack->add_option("--model", f.model, "model file")->required();
  attack->add_option("--object", f.object, "object id (default: all)");
  attack->add_option("--out", f.out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "dataset, training, epsilon sweep and report");
  common(sweep);
  attack_flags(sweep);
  sweep->add_option("--out", f.out, "report directory")->required();

  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (f.jobs) omp_set_num_threads(*f.jobs);
    if (*dataset) return cmd_dataset(f);
    if (*train) return cmd_train(f);
    if (*attack) return cmd_attack(f);
    if (*sweep) return cmd_sweep(f);
    return cmd_verify(f);
  } catch (const viap::Error& e) {
    print_error(e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    print_error("bad_config", e.what());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
  }
  return 1;
}
