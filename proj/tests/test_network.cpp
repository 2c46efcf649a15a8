#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "viap/classifier.hpp"
#include "viap/network.hpp"

using viap::Architecture;
using viap::Exec;
using viap::ModelParams;
using viap::Tensor;

namespace {

Tensor random_images(std::size_t B, const Architecture& a, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t({B, a.height, a.width, a.channels});
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

TEST(Network, ZeroWeightsGiveUniformSoftmax) {
  const Architecture a{8, 8, 3, 5};
  const ModelParams p = ModelParams::zeros(a);
  std::mt19937_64 rng(1);
  const Tensor logits = viap::forward(p, random_images(3, a, rng));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
  const Tensor probs = viap::softmax(logits);
  for (double v : probs.data()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Network, UniformLogitsTwoClassesLossIsLnTwo) {
  const Architecture a{4, 4, 3, 2};
  const ModelParams p = ModelParams::zeros(a);
  std::mt19937_64 rng(2);
  const std::size_t labels[] = {1, 0};
  const auto r = viap::loss_and_input_grad(p, random_images(2, a, rng), labels);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
}

TEST(Network, ForwardMatchesLongDoubleOracle) {
  const Architecture a{8, 12, 3, 4};
  std::mt19937_64 rng(3);
  const ModelParams p = viap::init_params(a, 11);
  const Tensor x = random_images(3, a, rng);
  const std::size_t labels[] = {0, 3, 1};
  const auto ref = oracle::forward(p, x, labels);
  const Tensor probs = viap::softmax(viap::forward(p, x));
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(probs[b * 4 + k], static_cast<double>(ref.probs[b][k]), 1e-13);
  EXPECT_NEAR(viap::loss_and_input_grad(p, x, labels).loss, static_cast<double>(ref.loss), 1e-13);
}

TEST(Network, IdenticalImagesGiveIdenticalRows) {
  const Architecture a{8, 8, 3, 4};
  std::mt19937_64 rng(4);
  const ModelParams p = viap::init_params(a, 5);
  const Tensor one = random_images(1, a, rng);
  std::vector<Tensor> copies(4, one.reshaped(a.image_shape()));
  const Tensor logits = viap::forward(p, viap::stack(copies));
  for (std::size_t b = 1; b < 4; ++b)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(logits[b * 4 + k], logits[k]);
}

TEST(Network, RepeatedPassesAreBitIdentical) {
  const Architecture a{8, 8, 3, 4};
  std::mt19937_64 rng(5);
  const ModelParams p = viap::init_params(a, 6);
  const Tensor x = random_images(4, a, rng);
  const std::size_t labels[] = {0, 1, 2, 3};
  const auto g1 = viap::loss_and_param_grad(p, x, labels);
  const auto g2 = viap::loss_and_param_grad(p, x, labels);
  EXPECT_EQ(g1.loss, g2.loss);
  EXPECT_TRUE(g1.grads == g2.grads);
  EXPECT_EQ(viap::loss_and_input_grad(p, x, labels).grad, viap::loss_and_input_grad(p, x, labels).grad);
}

TEST(Network, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 30.0);
  Tensor logits({10, 7});
  for (double& v : logits.data()) v = n(rng);
  const Tensor p = viap::softmax(logits);
  for (std::size_t b = 0; b < 10; ++b) {
    double s = 0.0;
    for (double v : p.slice(b)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Network, BatchLossIsMeanOfExampleLosses) {
  const Architecture a{8, 8, 3, 4};
  std::mt19937_64 rng(7);
  const ModelParams p = viap::init_params(a, 8);
  const Tensor x = random_images(5, a, rng);
  const std::size_t labels[] = {3, 1, 0, 2, 2};
  const auto r = viap::Graph::record(p, x).backward(p, labels, viap::kGradNone);
  double mean = 0.0;
  for (std::size_t b = 0; b < 5; ++b) {
    const Tensor one = Tensor(a.image_shape(), {x.slice(b).begin(), x.slice(b).end()}).reshaped({1, 8, 8, 3});
    const std::size_t l[] = {labels[b]};
    const double lb = viap::loss_and_input_grad(p, one, l).loss;
    EXPECT_NEAR(lb, r.example_losses[b], 1e-15);
    mean += lb / 5.0;
  }
  EXPECT_NEAR(r.loss, mean, 1e-12);
}

TEST(Network, DuplicatingAnImageHalvesEachCopysGradient) {
  const Architecture a{8, 8, 3, 4};
  std::mt19937_64 rng(8);
  const ModelParams p = viap::init_params(a, 9);
  const Tensor one = random_images(1, a, rng);
  const std::size_t l1[] = {2};
  const std::size_t l2[] = {2, 2};
  const Tensor g1 = viap::loss_and_input_grad(p, one, l1).grad;
  std::vector<Tensor> two(2, one.reshaped(a.image_shape()));
  const Tensor g2 = viap::loss_and_input_grad(p, viap::stack(two), l2).grad;
  const std::size_t n = g1.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(g2[i], 0.5 * g1[i], 1e-15);
    EXPECT_NEAR(g2[n + i], 0.5 * g1[i], 1e-15);
  }
}

TEST(Network, ReferenceAndParallelAgree) {
  const Architecture a{16, 8, 3, 3};
  std::mt19937_64 rng(9);
  const ModelParams p = viap::init_params(a, 10);
  const Tensor x = random_images(6, a, rng);
  const std::size_t labels[] = {0, 1, 2, 0, 1, 2};
  EXPECT_EQ(viap::forward(p, x, Exec::reference), viap::forward(p, x, Exec::parallel));
  const auto r = viap::loss_and_param_grad(p, x, labels, Exec::reference);
  const auto o = viap::loss_and_param_grad(p, x, labels, Exec::parallel);
  EXPECT_EQ(r.loss, o.loss);
  const auto fr = r.grads.fields();
  const auto fo = o.grads.fields();
  for (std::size_t f = 0; f < fr.size(); ++f) EXPECT_LT(viap::max_abs_diff(*fr[f], *fo[f]), 1e-13);
}

TEST(Network, StationaryPointHasVanishingGradients) {
  // A dense bias that overwhelms everything else drives p(label) to 1.
  const Architecture a{8, 8, 3, 3};
  ModelParams p = viap::init_params(a, 12);
  p.dense_b[1] = 60.0;
  std::mt19937_64 rng(10);
  const std::size_t labels[] = {1, 1};
  const auto r = viap::loss_and_param_grad(p, random_images(2, a, rng), labels);
  EXPECT_LT(r.loss, 1e-20);
  for (const Tensor* g : r.grads.fields())
    for (double v : g->data()) EXPECT_LT(std::abs(v), 1e-15);
}

TEST(Network, GradientShapesFollowParams) {
  const Architecture a{8, 8, 3, 4};
  const ModelParams p = viap::init_params(a, 1);
  std::mt19937_64 rng(11);
  const std::size_t labels[] = {0};
  const auto r = viap::loss_and_param_grad(p, random_images(1, a, rng), labels);
  const auto pf = p.fields();
  const auto gf = r.grads.fields();
  for (std::size_t f = 0; f < pf.size(); ++f) EXPECT_EQ(pf[f]->shape(), gf[f]->shape());
}

TEST(Network, Errors) {
  const Architecture a{8, 8, 3, 4};
  const ModelParams p = viap::init_params(a, 1);
  std::mt19937_64 rng(12);
  const Tensor x = random_images(2, a, rng);
  const std::size_t bad[] = {0, 4};
  try {
    viap::loss_and_input_grad(p, x, bad);
    FAIL();
  } catch (const viap::Error& e) {
    EXPECT_EQ(e.kind(), "label_out_of_range");
  }
  const std::size_t short_labels[] = {0};
  EXPECT_THROW(viap::loss_and_input_grad(p, x, short_labels), viap::ShapeError);
  EXPECT_THROW(viap::forward(p, Tensor({2, 8, 4, 3})), viap::ShapeError);
  Tensor nan = x;
  nan[5] = std::nan("");
  EXPECT_THROW(viap::forward(p, nan), viap::NonFiniteError);
  const viap::Graph empty;
  const std::size_t one[] = {0};
  EXPECT_THROW(empty.backward(p, one, viap::kGradInput), viap::Error);
  EXPECT_THROW(Architecture({10, 8, 3, 4}).validate(), viap::ShapeError);
}

TEST(Network, SharedGradientRoutesAgree) {
  const Architecture a{8, 8, 3, 4};
  const viap::ConvNet net(viap::init_params(a, 2));
  std::mt19937_64 rng(13);
  const Tensor x = random_images(4, a, rng);
  Tensor delta(a.image_shape());
  for (double& v : delta.data()) v = std::uniform_real_distribution<double>(-0.02, 0.02)(rng);
  const std::size_t labels[] = {0, 1, 2, 3};
  const auto fused = net.loss_and_shared_grad(x, delta, labels);
  const auto per = net.loss_and_input_grad(viap::add_clamped(x, delta), labels);
  Tensor sum(a.image_shape());
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += per.grad[b * sum.size() + i];
  EXPECT_LT(viap::max_abs_diff(fused.grad, sum), 1e-15);
  EXPECT_EQ(fused.loss, per.loss);
}
