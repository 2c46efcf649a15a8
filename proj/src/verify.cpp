#include "viap/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "internal/format.hpp"
#include "viap/attacks.hpp"
#include "viap/classifier.hpp"
#include "viap/model_io.hpp"
#include "viap/stats.hpp"

namespace viap {

namespace {

Architecture small_arch() { return {8, 8, 3, 4}; }

Tensor random_batch(std::size_t batch, const Architecture& arch, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({batch, arch.height, arch.width, arch.channels});
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::vector<std::size_t> out(n);
  for (auto& l : out) l = pick(rng);
  return out;
}

// Relative error with a floor so that two tiny values do not count as far apart.
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7}); }

struct FdStats {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Central differences of the mean loss along `coord` of `target`, skipping
// probes that cross an activation or pooling boundary.
void fd_probe(FdStats& s, Tensor& target, std::size_t coord, double analytic,
              const std::function<Graph()>& record, const ModelParams& params,
              std::span<const std::size_t> labels) {
  constexpr double h = 1e-5;
  const double saved = target[coord];
  target[coord] = saved + h;
  const Graph plus = record();
  target[coord] = saved - h;
  const Graph minus = record();
  target[coord] = saved;
  if (plus.activation_pattern() != minus.activation_pattern()) {
    ++s.skipped;
    return;
  }
  const double lp = plus.backward(params, labels, kGradNone).loss;
  const double lm = minus.backward(params, labels, kGradNone).loss;
  s.worst = std::max(s.worst, rel_err(analytic, (lp - lm) / (2 * h)));
  ++s.checked;
}

CheckResult check_gradients(std::mt19937_64& rng) {
  const Architecture arch = small_arch();
  FdStats s;
  for (int trial = 0; trial < 4; ++trial) {
    ModelParams params = init_params(arch, rng());
    for (Tensor* f : params.fields())
      for (double& v : f->data()) v += 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);
    Tensor batch = random_batch(2, arch, 0.0, 1.0, rng);
    const auto labels = random_labels(2, arch.classes, rng);
    const BackwardResult r = Graph::record(params, batch).backward(params, labels, kGradInput | kGradParams);
    auto record = [&] { return Graph::record(params, batch); };
    std::uniform_int_distribution<std::size_t> any_pixel(0, batch.size() - 1);
    for (int k = 0; k < 12; ++k) {
      const std::size_t i = any_pixel(rng);
      fd_probe(s, batch, i, r.input_grad[i], record, params, labels);
    }
    auto fields = params.fields();
    const auto grads = r.param_grads.fields();
    for (std::size_t f = 0; f < fields.size(); ++f) {
      std::uniform_int_distribution<std::size_t> any(0, fields[f]->size() - 1);
      for (int k = 0; k < 4; ++k) {
        const std::size_t i = any(rng);
        fd_probe(s, *fields[f], i, (*grads[f])[i], record, params, labels);
      }
    }
  }
  const bool ok = s.worst < 1e-6 && s.skipped * 4 <= s.checked + s.skipped;
  return {"finite_difference_gradients", ok,
          "worst rel err " + detail::fmt_fixed(s.worst, 12) + " over " + std::to_string(s.checked) + " probes, " +
              std::to_string(s.skipped) + " skipped at kinks"};
}

// Routes the default (summing) implementation through a plain Model.
class SummingModel final : public Model {
 public:
  explicit SummingModel(const ModelParams& p) : params_(p) {}
  Shape image_shape() const override { return params_.arch.image_shape(); }
  std::size_t num_classes() const override { return params_.arch.classes; }
  Tensor logits(const Tensor& b) const override { return forward(params_, b, Exec::reference); }
  LossGrad loss_and_input_grad(const Tensor& b, std::span<const std::size_t> l) const override {
    return viap::loss_and_input_grad(params_, b, l, Exec::reference);
  }

 private:
  const ModelParams& params_;
};

CheckResult check_shared_gradient(std::mt19937_64& rng) {
  const Architecture arch = small_arch();
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams params = init_params(arch, rng());
    const std::size_t B = 2 + trial % 7;
    const Tensor images = random_batch(B, arch, 0.1, 0.9, rng);
    Tensor delta({arch.height, arch.width, arch.channels});
    for (double& v : delta.data()) v = std::uniform_real_distribution<double>(-0.05, 0.05)(rng);
    const auto labels = random_labels(B, arch.classes, rng);
    const LossGrad fused = ConvNet(params).loss_and_shared_grad(images, delta, labels);
    const LossGrad summed = SummingModel(params).loss_and_shared_grad(images, delta, labels);
    worst = std::max(worst, max_abs_diff(fused.grad, summed.grad));
  }
  return {"shared_perturbation_gradient", worst < 1e-10, "max abs diff " + detail::fmt_double(worst)};
}

CheckResult check_kernel_agreement(std::mt19937_64& rng) {
  const Architecture arch{16, 16, 3, 5};
  bool logits_equal = true;
  double worst = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    const ModelParams params = init_params(arch, rng());
    const Tensor batch = random_batch(5, arch, 0.0, 1.0, rng);
    const auto labels = random_labels(5, arch.classes, rng);
    logits_equal = logits_equal && forward(params, batch, Exec::parallel) == forward(params, batch, Exec::reference);
    const unsigned all = kGradInput | kGradShared | kGradParams;
    const auto a = Graph::record(params, batch, Exec::parallel).backward(params, labels, all);
    const auto b = Graph::record(params, batch, Exec::reference).backward(params, labels, all);
    worst = std::max({worst, max_abs_diff(a.input_grad, b.input_grad), max_abs_diff(a.shared_grad, b.shared_grad)});
    const auto ga = a.param_grads.fields();
    const auto gb = b.param_grads.fields();
    for (std::size_t f = 0; f < ga.size(); ++f) worst = std::max(worst, max_abs_diff(*ga[f], *gb[f]));
  }
  return {"parallel_matches_reference", logits_equal && worst < 1e-12,
          std::string(logits_equal ? "logits bit-identical" : "logits differ") + ", grad max abs diff " +
              detail::fmt_double(worst)};
}

CheckResult check_ball_invariants(std::mt19937_64& rng) {
  const Architecture arch = small_arch();
  const ConvNet model(init_params(arch, rng()));
  const AttackFamily families[] = {AttackFamily::fgsm, AttackFamily::fgsm_targeted, AttackFamily::bim,
                                   AttackFamily::bim_targeted, AttackFamily::viap, AttackFamily::viap_targeted};
  std::size_t violations = 0, cases = 0;
  for (int trial = 0; trial < 120; ++trial) {
    AttackConfig c;
    c.family = families[trial % 6];
    c.epsilon = std::uniform_real_distribution<double>(0.0, 60.0)(rng);
    c.iterations = 1 + trial % 5;
    c.target = random_labels(1, arch.classes, rng)[0];
    c.seed = rng();
    const Tensor images = random_batch(3, arch, 0.0, 1.0, rng);
    const double bound = c.epsilon_unit() + 1e-12;
    auto in_ball = [&](const Tensor& adv, std::span<const double> clean) {
      for (std::size_t i = 0; i < adv.size(); ++i)
        if (std::abs(adv[i] - clean[i]) > bound || adv[i] < 0.0 || adv[i] > 1.0) return false;
      return true;
    };
    ++cases;
    if (is_universal(c.family)) {
      bool ok = true;
      const auto labels = random_labels(3, arch.classes, rng);
      viap(model, images, labels, c, [&](std::size_t, const Tensor&, const Tensor& delta) {
        for (std::size_t b = 0; b < 3; ++b) {
          Perturbation p;
          p.delta = delta;
          ok = ok && in_ball(apply(p, Tensor(delta.shape(), {images.slice(b).begin(), images.slice(b).end()})),
                             images.slice(b));
        }
      });
      violations += !ok;
    } else {
      const Tensor image = Tensor(model.image_shape(), {images.slice(0).begin(), images.slice(0).end()});
      bool ok = true;
      if (is_iterative(c.family)) {
        bim(model, image, 0, c, [&](std::size_t, const Tensor&, const Tensor& adv) { ok = ok && in_ball(adv, image.data()); });
      } else {
        ok = in_ball(attack_image(model, image, 0, c), image.data());
      }
      violations += !ok;
    }
  }
  return {"epsilon_ball_and_range", violations == 0,
          std::to_string(violations) + " violations in " + std::to_string(cases) + " cases"};
}

CheckResult check_reductions(std::mt19937_64& rng) {
  const Architecture arch = small_arch();
  const ConvNet model(init_params(arch, rng()));
  std::size_t fgsm_mismatch = 0, direction_mismatch = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor batch = random_batch(1, arch, 0.1, 0.9, rng);
    const Tensor image = batch.reshaped(arch.image_shape());
    const std::size_t label = random_labels(1, arch.classes, rng)[0];
    AttackConfig c;
    c.family = AttackFamily::bim;
    c.epsilon = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
    c.iterations = 1;
    c.literal_step = true;
    fgsm_mismatch += !(bim(model, image, label, c) == fgsm(model, image, label, c.epsilon_unit()));

    c.iterations = 6;
    std::vector<Tensor> bim_dirs, viap_dirs;
    bim(model, image, label, c, [&](std::size_t, const Tensor& d, const Tensor&) { bim_dirs.push_back(d); });
    AttackConfig v = c;
    v.family = AttackFamily::viap;
    v.init_noise = 0.0;
    const std::size_t labels[] = {label};
    viap(model, batch, labels, v, [&](std::size_t, const Tensor& d, const Tensor&) { viap_dirs.push_back(d); });
    direction_mismatch += bim_dirs != viap_dirs;
  }
  return {"attack_reductions", fgsm_mismatch == 0 && direction_mismatch == 0,
          "BIM(N=1) vs FGSM mismatches " + std::to_string(fgsm_mismatch) + ", VIAP vs BIM direction mismatches " +
              std::to_string(direction_mismatch)};
}

CheckResult check_ttest() {
  const double a[] = {-1.5, 0.25, 0.5, 2.0, -1.25};
  const double b[] = {1.5, -0.25, -0.5, -2.0, 1.25};
  const TTestResult sym = welch_ttest(a, b);
  const double x[] = {0.42, 0.51, 0.39, 0.47, 0.55, 0.44};
  const double y[] = {0.30, 0.36, 0.33, 0.29, 0.41};
  const TTestResult w = welch_ttest(x, y);
  const bool ok = std::abs(sym.p - 1.0) <= 1e-12 && w.p > 0.0 && w.p < 0.01 && w.df > 0.0;
  return {"welch_ttest", ok, "symmetric p " + detail::fmt_double(sym.p) + ", shifted p " + detail::fmt_double(w.p)};
}

CheckResult check_round_trips(std::mt19937_64& rng) {
  const ModelParams params = init_params(small_arch(), rng());
  const bool model_ok = decode_params(encode_params(params)) == params;
  Perturbation p;
  p.delta = random_batch(1, small_arch(), -0.01, 0.01, rng).reshaped(small_arch().image_shape());
  p.config.family = AttackFamily::viap_targeted;
  p.config.target = 2;
  p.training_views = {{0, 1}, {0, 2}};
  p.final_loss = 0.125;
  const Perturbation q = decode_perturbation(encode_perturbation(p));
  const bool delta_ok = q.delta == p.delta && q.training_views == p.training_views && q.final_loss == p.final_loss &&
                        q.config.target == p.config.target;
  return {"file_round_trips", model_ok && delta_ok,
          std::string("model ") + (model_ok ? "ok" : "differs") + ", perturbation " + (delta_ok ? "ok" : "differs")};
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  out.push_back(check_gradients(rng));
  out.push_back(check_shared_gradient(rng));
  out.push_back(check_kernel_agreement(rng));
  out.push_back(check_ball_invariants(rng));
  out.push_back(check_reductions(rng));
  out.push_back(check_ttest());
  out.push_back(check_round_trips(rng));
  return out;
}

}  // namespace viap
