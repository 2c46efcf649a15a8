// Reference vs OpenMP kernels, and a full forward/backward pass.
#include <benchmark/benchmark.h>

#include <random>

#include "viap/classifier.hpp"
#include "viap/kernels.hpp"
#include "viap/network.hpp"

namespace k = viap::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Second convolution of the default network on a batch of B views.
k::ConvDims conv2_dims(std::size_t B) { return {B, 16, 16, 8, 16, 3}; }

template <auto Fn>
void BM_ConvForward(benchmark::State& state) {
  const auto d = conv2_dims(static_cast<std::size_t>(state.range(0)));
  const auto in = random_vec(d.input_size(), 1), w = random_vec(d.weight_size(), 2), b = random_vec(16, 3);
  std::vector<double> out(d.output_size());
  for (auto _ : state) {
    Fn(d, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void BM_ConvBackwardInput(benchmark::State& state) {
  const auto d = conv2_dims(static_cast<std::size_t>(state.range(0)));
  const auto w = random_vec(d.weight_size(), 2), g = random_vec(d.output_size(), 4);
  std::vector<double> out(d.input_size());
  for (auto _ : state) {
    Fn(d, w, g, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Fn>
void BM_ConvBackwardParams(benchmark::State& state) {
  const auto d = conv2_dims(static_cast<std::size_t>(state.range(0)));
  const auto in = random_vec(d.input_size(), 1), g = random_vec(d.output_size(), 4);
  std::vector<double> gw(d.weight_size()), gb(16);
  for (auto _ : state) {
    Fn(d, in, g, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
}

void BM_ForwardBackward(benchmark::State& state, viap::Exec exec) {
  const std::size_t B = static_cast<std::size_t>(state.range(0));
  const viap::ModelParams p = viap::init_params({32, 32, 3, 4}, 1);
  const viap::Tensor x({B, 32, 32, 3}, random_vec(B * 32 * 32 * 3, 5));
  std::vector<std::size_t> labels(B, 1);
  for (auto _ : state) {
    auto r = viap::loss_and_param_grad(p, x, labels, exec);
    benchmark::DoNotOptimize(r.loss);
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<k::reference::conv2d_forward>)->Name("conv_forward/reference")->Arg(1)->Arg(16);
BENCHMARK(BM_ConvForward<k::omp::conv2d_forward>)->Name("conv_forward/omp")->Arg(1)->Arg(16);
BENCHMARK(BM_ConvBackwardInput<k::reference::conv2d_backward_input>)->Name("conv_backward_input/reference")->Arg(16);
BENCHMARK(BM_ConvBackwardInput<k::omp::conv2d_backward_input>)->Name("conv_backward_input/omp")->Arg(16);
BENCHMARK(BM_ConvBackwardParams<k::reference::conv2d_backward_params>)->Name("conv_backward_params/reference")->Arg(16);
BENCHMARK(BM_ConvBackwardParams<k::omp::conv2d_backward_params>)->Name("conv_backward_params/omp")->Arg(16);
BENCHMARK_CAPTURE(BM_ForwardBackward, reference, viap::Exec::reference)->Arg(16);
BENCHMARK_CAPTURE(BM_ForwardBackward, parallel, viap::Exec::parallel)->Arg(16);

BENCHMARK_MAIN();
