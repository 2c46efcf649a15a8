// Analytic gradients against central differences of the long-double oracle.
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "viap/classifier.hpp"

namespace {

struct Case {
  viap::ModelParams params;
  viap::Tensor batch;
  std::vector<std::size_t> labels;
};

Case random_case(std::uint64_t seed, std::size_t B) {
  std::mt19937_64 rng(seed);
  const viap::Architecture a{8, 8, 3, 4};
  Case c{viap::init_params(a, rng()), viap::Tensor({B, 8, 8, 3}), {}};
  for (viap::Tensor* f : c.params.fields())
    for (double& v : f->data()) v += std::uniform_real_distribution<double>(-0.05, 0.05)(rng);
  for (double& v : c.batch.data()) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (std::size_t b = 0; b < B; ++b) c.labels.push_back(std::uniform_int_distribution<std::size_t>(0, 3)(rng));
  return c;
}

struct Probe {
  bool kink = false;
  double numeric = 0.0;
};

// Perturbs target[i] by +-h and differentiates the oracle loss.
Probe central_difference(Case& c, viap::Tensor& target, std::size_t i) {
  constexpr long double h = 1e-5L;
  const double saved = target[i];
  target[i] = static_cast<double>(saved + h);
  const long double hp = static_cast<long double>(target[i]) - saved;
  const auto plus = oracle::forward(c.params, c.batch, c.labels);
  target[i] = static_cast<double>(saved - h);
  const long double hm = saved - static_cast<long double>(target[i]);
  const auto minus = oracle::forward(c.params, c.batch, c.labels);
  target[i] = saved;
  if (plus.pattern != minus.pattern) return {true, 0.0};
  return {false, static_cast<double>((plus.loss - minus.loss) / (hp + hm))};
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); }

}  // namespace

TEST(Gradients, InputGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Case c = random_case(seed, 2);
    const viap::Tensor g = viap::loss_and_input_grad(c.params, c.batch, c.labels).grad;
    std::size_t kinks = 0;
    for (std::size_t i = 0; i < c.batch.size(); ++i) {
      const Probe p = central_difference(c, c.batch, i);
      if (p.kink) {
        ++kinks;
        continue;
      }
      EXPECT_LT(rel_err(g[i], p.numeric), 1e-6) << "seed " << seed << " pixel " << i;
    }
    EXPECT_LT(kinks, c.batch.size() / 10);
  }
}

TEST(Gradients, ParameterGradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 11; seed <= 13; ++seed) {
    Case c = random_case(seed, 2);
    const auto r = viap::loss_and_param_grad(c.params, c.batch, c.labels);
    auto fields = c.params.fields();
    const auto grads = r.grads.fields();
    for (std::size_t f = 0; f < fields.size(); ++f) {
      std::size_t kinks = 0;
      for (std::size_t i = 0; i < fields[f]->size(); ++i) {
        const Probe p = central_difference(c, *fields[f], i);
        if (p.kink) {
          ++kinks;
          continue;
        }
        EXPECT_LT(rel_err((*grads[f])[i], p.numeric), 1e-6)
            << viap::ModelParams::kFieldNames[f] << "[" << i << "] seed " << seed;
      }
      EXPECT_LE(kinks, fields[f]->size() / 10 + 1) << viap::ModelParams::kFieldNames[f];
    }
  }
}

TEST(Gradients, SharedGradientMatchesFiniteDifferencesOfDelta) {
  Case c = random_case(21, 3);
  const viap::ConvNet net(c.params);
  viap::Tensor delta({8, 8, 3});
  std::mt19937_64 rng(22);
  for (double& v : delta.data()) v = std::uniform_real_distribution<double>(-0.01, 0.01)(rng);
  for (double& v : c.batch.data()) v = 0.1 + 0.8 * v;  // keep X + delta inside [0,1]
  const viap::Tensor g = net.loss_and_shared_grad(c.batch, delta, c.labels).grad;
  auto loss_at = [&](const viap::Tensor& d) {
    return oracle::forward(c.params, viap::add_clamped(c.batch, d), c.labels);
  };
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double saved = delta[i];
    delta[i] = saved + 1e-5;
    const auto plus = loss_at(delta);
    delta[i] = saved - 1e-5;
    const auto minus = loss_at(delta);
    delta[i] = saved;
    if (plus.pattern != minus.pattern) continue;
    const double numeric = static_cast<double>((plus.loss - minus.loss) / 2e-5L);
    EXPECT_LT(rel_err(g[i], numeric), 1e-6) << i;
  }
}
