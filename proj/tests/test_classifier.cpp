#include <gtest/gtest.h>

#include <cmath>

#include "viap/classifier.hpp"

using viap::Split;

namespace {

const viap::Dataset& small_dataset() {
  static const viap::Dataset d = [] {
    viap::DatasetConfig c;
    c.objects_per_class = 2;
    c.views_per_object = 4;
    c.train_views_per_object = 3;
    c.render.height = c.render.width = 16;
    c.classes[0].albedo = {0.9, 0.2, 0.2};
    c.classes[1].albedo = {0.2, 0.8, 0.2};
    c.classes[2].albedo = {0.2, 0.3, 0.9};
    c.classes[3].albedo = {0.9, 0.8, 0.1};
    return viap::generate_dataset(c);
  }();
  return d;
}

viap::Architecture small_arch() { return {16, 16, 3, 4}; }

}  // namespace

TEST(Classifier, InitIsSeededAndBounded) {
  const auto a = viap::init_params(small_arch(), 4);
  EXPECT_TRUE(a == viap::init_params(small_arch(), 4));
  EXPECT_FALSE(a == viap::init_params(small_arch(), 5));
  for (const viap::Tensor* f : a.fields())
    for (double v : f->data()) EXPECT_LT(std::abs(v), 1.0);
  for (double v : a.conv1_b.data()) EXPECT_EQ(v, 0.0);
}

TEST(Classifier, UniformModelHasQuarterConfidence) {
  const auto& d = small_dataset();
  const auto r = viap::evaluate_clean(viap::ModelParams::zeros(small_arch()), d.split(Split::train));
  EXPECT_DOUBLE_EQ(r.mean_true_softmax, 0.25);
}

TEST(Classifier, TinyLearningRateBarelyMoves) {
  const auto& d = small_dataset();
  const auto init = viap::init_params(small_arch(), 1);
  viap::TrainConfig c;
  c.epochs = 1;
  c.learning_rate = 1e-9;
  const auto r = viap::train(init, d.split(Split::train), d.split(Split::test), c);
  const double before = viap::evaluate_clean(init, d.split(Split::train)).accuracy;
  EXPECT_NEAR(r.log.at(0).train_acc, before, 0.02);
}

TEST(Classifier, TrainingReducesLoss) {
  const auto& d = small_dataset();
  viap::TrainConfig c;
  c.epochs = 15;
  c.batch_size = 8;
  const auto r = viap::train(viap::init_params(small_arch(), 2), d.split(Split::train), d.split(Split::test), c);
  ASSERT_EQ(r.log.size(), 15u);
  EXPECT_LT(r.log.back().loss, 0.5 * r.initial_loss);
  EXPECT_GE(r.log.back().train_acc, 0.75);
  const std::string csv = viap::train_log_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,train_acc,test_acc");
}

TEST(Classifier, TrainingIsDeterministic) {
  const auto& d = small_dataset();
  viap::TrainConfig c;
  c.epochs = 2;
  const auto a = viap::train(viap::init_params(small_arch(), 3), d.split(Split::train), {}, c);
  const auto b = viap::train(viap::init_params(small_arch(), 3), d.split(Split::train), {}, c);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_TRUE(std::isnan(a.log[0].test_acc));
}

TEST(Classifier, DivergenceIsReported) {
  const auto& d = small_dataset();
  viap::TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 1e300;
  c.momentum = 0.0;
  try {
    viap::train(viap::init_params(small_arch(), 4), d.split(Split::train), {}, c);
    FAIL();
  } catch (const viap::Error& e) {
    EXPECT_EQ(e.kind(), "diverged");
  }
}

TEST(Classifier, ConfigValidation) {
  viap::TrainConfig c;
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), viap::Error);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), viap::Error);
  const nlohmann::json j = viap::TrainConfig{};
  EXPECT_EQ(nlohmann::json(j.get<viap::TrainConfig>()), j);
}
