#include <omp.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "viap/kernels.hpp"

namespace viap::kernels::omp {

namespace {

using Index = long long;  // OpenMP loop counters must be signed

// Sums `parts` consecutive blocks of `n` values into `out`, block 0 first.
void ordered_reduce(const std::vector<double>& blocks, std::size_t parts, std::size_t n, std::span<double> out) {
  std::fill(out.begin(), out.begin() + n, 0.0);
  for (std::size_t p = 0; p < parts; ++p) {
    const double* src = blocks.data() + p * n;
    for (std::size_t i = 0; i < n; ++i) out[i] += src[i];
  }
}

}  // namespace

void conv2d_forward(const ConvDims& d, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t H = d.height, W = d.width, Ci = d.in_channels, Co = d.out_channels, K = d.kernel;
  const long pad = static_cast<long>(K / 2);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    const double* src = in.data() + b * H * W * Ci;
    double* dst = out.data() + b * H * W * Co;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        double* o = dst + (y * W + x) * Co;
        for (std::size_t co = 0; co < Co; ++co) o[co] = bias[co];
        for (std::size_t ky = 0; ky < K; ++ky) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < K; ++kx) {
            const long ix = static_cast<long>(x + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            const double* px = src + (iy * W + ix) * Ci;
            for (std::size_t co = 0; co < Co; ++co) {
              const double* wk = weight.data() + ((co * K + ky) * K + kx) * Ci;
              double acc = o[co];
              for (std::size_t ci = 0; ci < Ci; ++ci) acc += wk[ci] * px[ci];
              o[co] = acc;
            }
          }
        }
      }
  }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> weight, std::span<const double> grad_out,
                           std::span<double> grad_in) {
  const std::size_t H = d.height, W = d.width, Ci = d.in_channels, Co = d.out_channels, K = d.kernel;
  const long pad = static_cast<long>(K / 2);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    double* gin = grad_in.data() + b * H * W * Ci;
    const double* gout = grad_out.data() + b * H * W * Co;
    std::fill(gin, gin + H * W * Ci, 0.0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double* g = gout + (y * W + x) * Co;
        for (std::size_t ky = 0; ky < K; ++ky) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < K; ++kx) {
            const long ix = static_cast<long>(x + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            double* px = gin + (iy * W + ix) * Ci;
            for (std::size_t co = 0; co < Co; ++co) {
              const double* wk = weight.data() + ((co * K + ky) * K + kx) * Ci;
              const double gc = g[co];
              for (std::size_t ci = 0; ci < Ci; ++ci) px[ci] += wk[ci] * gc;
            }
          }
        }
      }
  }
}

void conv2d_backward_input_shared(const ConvDims& d, std::span<const double> weight,
                                  std::span<const double> grad_out, std::span<double> grad_shared) {
  std::vector<double> per_example(d.input_size());
  conv2d_backward_input(d, weight, grad_out, per_example);
  ordered_reduce(per_example, d.batch, d.height * d.width * d.in_channels, grad_shared);
}

void conv2d_backward_params(const ConvDims& d, std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t H = d.height, W = d.width, Ci = d.in_channels, Co = d.out_channels, K = d.kernel;
  const long pad = static_cast<long>(K / 2);
  const std::size_t nw = d.weight_size();
  std::vector<double> gw(d.batch * nw, 0.0), gb(d.batch * Co, 0.0);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    const double* src = in.data() + b * H * W * Ci;
    const double* gout = grad_out.data() + b * H * W * Co;
    double* w_acc = gw.data() + b * nw;
    double* b_acc = gb.data() + b * Co;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double* g = gout + (y * W + x) * Co;
        for (std::size_t co = 0; co < Co; ++co) b_acc[co] += g[co];
        for (std::size_t ky = 0; ky < K; ++ky) {
          const long iy = static_cast<long>(y + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(H)) continue;
          for (std::size_t kx = 0; kx < K; ++kx) {
            const long ix = static_cast<long>(x + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(W)) continue;
            const double* px = src + (iy * W + ix) * Ci;
            for (std::size_t co = 0; co < Co; ++co) {
              double* wk = w_acc + ((co * K + ky) * K + kx) * Ci;
              const double gc = g[co];
              for (std::size_t ci = 0; ci < Ci; ++ci) wk[ci] += gc * px[ci];
            }
          }
        }
      }
  }
  ordered_reduce(gw, d.batch, nw, grad_weight);
  ordered_reduce(gb, d.batch, Co, grad_bias);
}

void relu_forward(std::span<const double> in, std::span<double> out) {
  const Index n = static_cast<Index>(in.size());
#pragma omp parallel for simd schedule(static)
  for (Index i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::span<const double> pre, std::span<const double> grad_out, std::span<double> grad_in) {
  const Index n = static_cast<Index>(pre.size());
#pragma omp parallel for simd schedule(static)
  for (Index i = 0; i < n; ++i) grad_in[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
}

void maxpool2_forward(const PoolDims& d, std::span<const double> in, std::span<double> out,
                      std::span<std::uint32_t> argmax) {
  const std::size_t H = d.height, W = d.width, C = d.channels, oh = d.out_height(), ow = d.out_width();
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = ((b * H + 2 * y + dy) * W + 2 * x + dx) * C + c;
              if (in[i] > best) {
                best = in[i];
                best_idx = i;
              }
            }
          const std::size_t o = ((b * oh + y) * ow + x) * C + c;
          out[o] = best;
          argmax[o] = static_cast<std::uint32_t>(best_idx);
        }
}

void maxpool2_backward(const PoolDims& d, std::span<const std::uint32_t> argmax, std::span<const double> grad_out,
                       std::span<double> grad_in) {
  const std::size_t in_per = d.height * d.width * d.channels;
  const std::size_t out_per = d.out_height() * d.out_width() * d.channels;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    std::fill(grad_in.begin() + b * in_per, grad_in.begin() + (b + 1) * in_per, 0.0);
    for (std::size_t o = b * out_per; o < (b + 1) * out_per; ++o) grad_in[argmax[o]] += grad_out[o];
  }
}

void dense_forward(const DenseDims& d, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out) {
  const std::size_t D = d.in_features, K = d.out_features;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = bias[k];
      const double* w = weight.data() + k * D;
      const double* x = in.data() + b * D;
      for (std::size_t j = 0; j < D; ++j) acc += w[j] * x[j];
      out[b * K + k] = acc;
    }
}

void dense_backward_input(const DenseDims& d, std::span<const double> weight, std::span<const double> grad_out,
                          std::span<double> grad_in) {
  const std::size_t D = d.in_features, K = d.out_features;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b) {
    double* gi = grad_in.data() + b * D;
    std::fill(gi, gi + D, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double g = grad_out[b * K + k];
      const double* w = weight.data() + k * D;
      for (std::size_t j = 0; j < D; ++j) gi[j] += w[j] * g;
    }
  }
}

void dense_backward_params(const DenseDims& d, std::span<const double> in, std::span<const double> grad_out,
                           std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t D = d.in_features, K = d.out_features;
  std::vector<double> gw(d.batch * K * D, 0.0);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(d.batch); ++b)
    for (std::size_t k = 0; k < K; ++k) {
      const double g = grad_out[b * K + k];
      double* w = gw.data() + (b * K + k) * D;
      const double* x = in.data() + b * D;
      for (std::size_t j = 0; j < D; ++j) w[j] = g * x[j];
    }
  ordered_reduce(gw, d.batch, K * D, grad_weight);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t k = 0; k < K; ++k) grad_bias[k] += grad_out[b * K + k];
}

}  // namespace viap::kernels::omp
