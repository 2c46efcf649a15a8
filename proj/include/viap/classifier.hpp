#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "viap/dataset.hpp"
#include "viap/network.hpp"

namespace viap {

/// He-style uniform init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
/// biases zero. Same seed, same bits.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 7;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;       // mean mini-batch loss over the epoch
  double train_acc = 0.0;  // clean top-1 after the epoch
  double test_acc = 0.0;   // NaN when no test views were given
};

struct TrainResult {
  ModelParams params;
  double initial_loss = 0.0;  // mean loss over the train split before any update
  std::vector<EpochLog> log;
};

/// Mini-batch SGD with momentum on the mean cross-entropy. Batches are drawn
/// from a per-epoch shuffle seeded by `config.seed`. Throws Error("diverged")
/// naming the epoch if the loss stops being finite.
TrainResult train(ModelParams params, const std::vector<const LabeledView*>& train_views,
                  const std::vector<const LabeledView*>& test_views, const TrainConfig& config);

struct CleanEval {
  double accuracy = 0.0;
  double mean_true_softmax = 0.0;
};

CleanEval evaluate_clean(const ModelParams& params, const std::vector<const LabeledView*>& views);

/// CSV with header epoch,loss,train_acc,test_acc.
std::string train_log_csv(const TrainResult& result);

}  // namespace viap
