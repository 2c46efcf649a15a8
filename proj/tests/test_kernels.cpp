#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "viap/kernels.hpp"

namespace k = viap::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Kernels, ConvMatchesDirectSum) {
  std::mt19937_64 rng(1);
  const k::ConvDims d{2, 5, 4, 3, 2, 3};
  const auto in = random_vec(d.input_size(), rng);
  const auto w = random_vec(d.weight_size(), rng);
  const auto b = random_vec(d.out_channels, rng);
  std::vector<double> out(d.output_size());
  k::reference::conv2d_forward(d, in, w, b, out);
  // Output (n=1, i=0, j=3, o=1): the top-right corner sees a 2x2 window.
  double expect = b[1];
  for (int di = 0; di <= 1; ++di)
    for (int dj = -1; dj <= 0; ++dj)
      for (std::size_t c = 0; c < 3; ++c)
        expect += w[((1 * 3 + (di + 1)) * 3 + (dj + 1)) * 3 + c] * in[((1 * 5 + di) * 4 + (3 + dj)) * 3 + c];
  EXPECT_NEAR(out[((1 * 5 + 0) * 4 + 3) * 2 + 1], expect, 1e-14);
}

TEST(Kernels, DenseHandExample) {
  const k::DenseDims d{1, 1, 2};
  const std::vector<double> x{0.5}, w{2.0, -1.0}, b{0.0, 0.0};
  std::vector<double> out(2);
  k::reference::dense_forward(d, x, w, b, out);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], -0.5);
  k::omp::dense_forward(d, x, w, b, out);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], -0.5);
}

TEST(Kernels, MaxPoolFirstMaximumWins) {
  const k::PoolDims d{1, 2, 2, 1};
  const std::vector<double> in{3.0, 3.0, 1.0, 3.0};
  std::vector<double> out(1);
  std::vector<std::uint32_t> arg(1);
  k::reference::maxpool2_forward(d, in, out, arg);
  EXPECT_EQ(out[0], 3.0);
  EXPECT_EQ(arg[0], 0u);
  std::vector<double> g(4, 7.0);
  const std::vector<double> gout{2.0};
  k::reference::maxpool2_backward(d, arg, gout, g);
  EXPECT_EQ(g, (std::vector<double>{2.0, 0.0, 0.0, 0.0}));
}

TEST(Kernels, ReluBackwardMasksNonPositive) {
  const std::vector<double> pre{-1.0, 0.0, 2.0};
  const std::vector<double> gout{5.0, 5.0, 5.0};
  std::vector<double> gin(3);
  k::reference::relu_backward(pre, gout, gin);
  EXPECT_EQ(gin, (std::vector<double>{0.0, 0.0, 5.0}));
}

TEST(Kernels, UniformLogitsGiveLogTwo) {
  const k::DenseDims d{3, 0, 2};
  const std::vector<double> logits(6, 0.25);
  const std::vector<std::size_t> labels{0, 1, 1};
  std::vector<double> probs(6), losses(3), grad(6);
  k::softmax_cross_entropy(d, logits, labels, probs, losses, grad);
  for (double l : losses) EXPECT_NEAR(l, std::log(2.0), 1e-15);
  for (double p : probs) EXPECT_EQ(p, 0.5);
  EXPECT_NEAR(grad[0], (0.5 - 1.0) / 3.0, 1e-16);
  EXPECT_NEAR(grad[1], 0.5 / 3.0, 1e-16);
}

TEST(Kernels, ParallelForwardIsBitIdentical) {
  std::mt19937_64 rng(2);
  const k::ConvDims d{5, 8, 6, 3, 4, 3};
  const auto in = random_vec(d.input_size(), rng);
  const auto w = random_vec(d.weight_size(), rng);
  const auto b = random_vec(d.out_channels, rng);
  std::vector<double> r(d.output_size()), o(d.output_size());
  k::reference::conv2d_forward(d, in, w, b, r);
  k::omp::conv2d_forward(d, in, w, b, o);
  EXPECT_EQ(r, o);

  const k::PoolDims p{5, 8, 6, 4};
  std::vector<double> pr(p.output_size()), po(p.output_size());
  std::vector<std::uint32_t> ar(p.output_size()), ao(p.output_size());
  k::reference::maxpool2_forward(p, r, pr, ar);
  k::omp::maxpool2_forward(p, o, po, ao);
  EXPECT_EQ(pr, po);
  EXPECT_EQ(ar, ao);

  const k::DenseDims dd{5, pr.size() / 5, 3};
  const auto dw = random_vec(dd.in_features * dd.out_features, rng);
  const auto db = random_vec(3, rng);
  std::vector<double> zr(15), zo(15);
  k::reference::dense_forward(dd, pr, dw, db, zr);
  k::omp::dense_forward(dd, po, dw, db, zo);
  EXPECT_EQ(zr, zo);
}

TEST(Kernels, ParallelBackwardMatchesReference) {
  std::mt19937_64 rng(3);
  const k::ConvDims d{4, 6, 7, 3, 5, 3};
  const auto in = random_vec(d.input_size(), rng);
  const auto w = random_vec(d.weight_size(), rng);
  const auto gout = random_vec(d.output_size(), rng);

  std::vector<double> gr(d.input_size()), go(d.input_size());
  k::reference::conv2d_backward_input(d, w, gout, gr);
  k::omp::conv2d_backward_input(d, w, gout, go);
  EXPECT_LT(max_diff(gr, go), 1e-13);

  const std::size_t shared = d.height * d.width * d.in_channels;
  std::vector<double> sr(shared), so(shared, 123.0);
  k::reference::conv2d_backward_input_shared(d, w, gout, sr);
  k::omp::conv2d_backward_input_shared(d, w, gout, so);
  EXPECT_LT(max_diff(sr, so), 1e-13);
  std::vector<double> summed(shared, 0.0);
  for (std::size_t n = 0; n < d.batch; ++n)
    for (std::size_t i = 0; i < shared; ++i) summed[i] += gr[n * shared + i];
  EXPECT_LT(max_diff(sr, summed), 1e-13);

  std::vector<double> wr(d.weight_size()), wo(d.weight_size(), 9.0), br(d.out_channels), bo(d.out_channels, 9.0);
  k::reference::conv2d_backward_params(d, in, gout, wr, br);
  k::omp::conv2d_backward_params(d, in, gout, wo, bo);
  EXPECT_LT(max_diff(wr, wo), 1e-12);
  EXPECT_LT(max_diff(br, bo), 1e-12);

  const k::DenseDims dd{4, 10, 3};
  const auto x = random_vec(40, rng);
  const auto dw = random_vec(30, rng);
  const auto dg = random_vec(12, rng);
  std::vector<double> ir(40), io(40), dwr(30), dwo(30), dbr(3), dbo(3);
  k::reference::dense_backward_input(dd, dw, dg, ir);
  k::omp::dense_backward_input(dd, dw, dg, io);
  k::reference::dense_backward_params(dd, x, dg, dwr, dbr);
  k::omp::dense_backward_params(dd, x, dg, dwo, dbo);
  EXPECT_LT(max_diff(ir, io), 1e-14);
  EXPECT_LT(max_diff(dwr, dwo), 1e-14);
  EXPECT_LT(max_diff(dbr, dbo), 1e-14);
}

TEST(Kernels, ParallelResultsDoNotDependOnThreadCount) {
  std::mt19937_64 rng(4);
  const k::ConvDims d{6, 8, 8, 3, 4, 3};
  const auto in = random_vec(d.input_size(), rng);
  const auto gout = random_vec(d.output_size(), rng);
  std::vector<double> w1(d.weight_size()), b1(4), w2(d.weight_size()), b2(4);
  k::omp::conv2d_backward_params(d, in, gout, w1, b1);
  k::omp::conv2d_backward_params(d, in, gout, w2, b2);
  EXPECT_EQ(w1, w2);
  EXPECT_EQ(b1, b2);
}
