#include "viap/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "internal/format.hpp"

namespace viap {

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(arch);
  std::mt19937_64 rng(seed);
  auto he_uniform = [&](Tensor& w) {
    const double fan_in = static_cast<double>(w.slice_size());
    std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (double& v : w.data()) v = u(rng);
  };
  he_uniform(p.conv1_w);
  he_uniform(p.conv2_w);
  he_uniform(p.dense_w);
  return p;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("bad_config", "epochs must be >= 1");
  if (batch_size < 1) throw Error("bad_config", "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("bad_config", "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("bad_config", "momentum must be in [0,1)");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.seed = j.value("seed", c.seed);
}

namespace {

double mean_loss(const ModelParams& params, const std::vector<const LabeledView*>& views) {
  const Tensor batch = stack_images(views);
  const auto labels = labels_of(views);
  return Graph::record(params, batch).backward(params, labels, kGradNone).loss;
}

}  // namespace

TrainResult train(ModelParams params, const std::vector<const LabeledView*>& train_views,
                  const std::vector<const LabeledView*>& test_views, const TrainConfig& config) {
  config.validate();
  if (train_views.empty()) throw Error("empty_dataset", "training split is empty");
  params.validate();

  TrainResult result;
  result.initial_loss = mean_loss(params, train_views);

  ModelParams velocity = ModelParams::zeros(params.arch);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_views.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const LabeledView*> chunk;
      for (std::size_t i = start; i < end; ++i) chunk.push_back(train_views[order[i]]);
      const auto labels = labels_of(chunk);
      LossParamGrad lg;
      try {
        lg = loss_and_param_grad(params, stack_images(chunk), labels);
      } catch (const NonFiniteError&) {
        throw Error("diverged", "training diverged in epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<double>(chunk.size());
      auto p = params.fields();
      auto v = velocity.fields();
      const auto g = lg.grads.fields();
      for (std::size_t f = 0; f < p.size(); ++f)
        for (std::size_t i = 0; i < p[f]->size(); ++i) {
          (*v[f])[i] = config.momentum * (*v[f])[i] - config.learning_rate * (*g[f])[i];
          (*p[f])[i] += (*v[f])[i];
        }
    }
    EpochLog row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(row.loss) || !std::all_of(params.fields().begin(), params.fields().end(),
                                                 [](const Tensor* t) { return t->all_finite(); })) {
      throw Error("diverged", "training diverged in epoch " + std::to_string(epoch));
    }
    row.train_acc = evaluate_clean(params, train_views).accuracy;
    row.test_acc = test_views.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : evaluate_clean(params, test_views).accuracy;
    result.log.push_back(row);
  }
  result.params = std::move(params);
  return result;
}

CleanEval evaluate_clean(const ModelParams& params, const std::vector<const LabeledView*>& views) {
  if (views.empty()) throw Error("empty_dataset", "cannot evaluate an empty split");
  const Tensor probs = softmax(forward(params, stack_images(views)));
  const std::size_t K = params.arch.classes;
  CleanEval e;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < views.size(); ++b) {
    const auto row = probs.slice(b);
    const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += top == views[b]->label;
    e.mean_true_softmax += probs[b * K + views[b]->label];
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(views.size());
  e.mean_true_softmax /= static_cast<double>(views.size());
  return e;
}

std::string train_log_csv(const TrainResult& result) {
  std::string out = "epoch,loss,train_acc,test_acc\n";
  for (const EpochLog& r : result.log) {
    out += std::to_string(r.epoch) + "," + detail::fmt_double(r.loss) + "," + detail::fmt_double(r.train_acc) + "," +
           (std::isnan(r.test_acc) ? std::string() : detail::fmt_double(r.test_acc)) + "\n";
  }
  return out;
}

}  // namespace viap
