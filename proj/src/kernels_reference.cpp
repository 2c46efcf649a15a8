#include <algorithm>
#include <cmath>
#include <limits>

#include "viap/kernels.hpp"

namespace viap::kernels::reference {

namespace {

std::size_t nhwc(std::size_t b, std::size_t y, std::size_t x, std::size_t c, std::size_t h, std::size_t w,
                 std::size_t ch) {
  return ((b * h + y) * w + x) * ch + c;
}

std::size_t widx(const ConvDims& d, std::size_t co, std::size_t ky, std::size_t kx, std::size_t ci) {
  return ((co * d.kernel + ky) * d.kernel + kx) * d.in_channels + ci;
}

// Input coordinate read by output coordinate `o` through kernel tap `k`, or
// -1 when it falls in the zero padding.
long tap(std::size_t o, std::size_t k, std::size_t pad, std::size_t extent) {
  const long i = static_cast<long>(o) + static_cast<long>(k) - static_cast<long>(pad);
  return (i < 0 || i >= static_cast<long>(extent)) ? -1 : i;
}

}  // namespace

void conv2d_forward(const ConvDims& d, std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t pad = d.kernel / 2;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t x = 0; x < d.width; ++x)
        for (std::size_t co = 0; co < d.out_channels; ++co) {
          double acc = bias[co];
          for (std::size_t ky = 0; ky < d.kernel; ++ky) {
            const long iy = tap(y, ky, pad, d.height);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < d.kernel; ++kx) {
              const long ix = tap(x, kx, pad, d.width);
              if (ix < 0) continue;
              for (std::size_t ci = 0; ci < d.in_channels; ++ci)
                acc += weight[widx(d, co, ky, kx, ci)] *
                       in[nhwc(b, iy, ix, ci, d.height, d.width, d.in_channels)];
            }
          }
          out[nhwc(b, y, x, co, d.height, d.width, d.out_channels)] = acc;
        }
}

void conv2d_backward_input(const ConvDims& d, std::span<const double> weight, std::span<const double> grad_out,
                           std::span<double> grad_in) {
  const long pad = static_cast<long>(d.kernel / 2);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t x = 0; x < d.width; ++x)
        for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < d.kernel; ++ky) {
            const long oy = static_cast<long>(y) - static_cast<long>(ky) + pad;
            if (oy < 0 || oy >= static_cast<long>(d.height)) continue;
            for (std::size_t kx = 0; kx < d.kernel; ++kx) {
              const long ox = static_cast<long>(x) - static_cast<long>(kx) + pad;
              if (ox < 0 || ox >= static_cast<long>(d.width)) continue;
              for (std::size_t co = 0; co < d.out_channels; ++co)
                acc += weight[widx(d, co, ky, kx, ci)] *
                       grad_out[nhwc(b, oy, ox, co, d.height, d.width, d.out_channels)];
            }
          }
          grad_in[nhwc(b, y, x, ci, d.height, d.width, d.in_channels)] = acc;
        }
}

void conv2d_backward_input_shared(const ConvDims& d, std::span<const double> weight,
                                  std::span<const double> grad_out, std::span<double> grad_shared) {
  std::fill(grad_shared.begin(), grad_shared.end(), 0.0);
  const long pad = static_cast<long>(d.kernel / 2);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t x = 0; x < d.width; ++x)
        for (std::size_t ci = 0; ci < d.in_channels; ++ci) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < d.kernel; ++ky) {
            const long oy = static_cast<long>(y) - static_cast<long>(ky) + pad;
            if (oy < 0 || oy >= static_cast<long>(d.height)) continue;
            for (std::size_t kx = 0; kx < d.kernel; ++kx) {
              const long ox = static_cast<long>(x) - static_cast<long>(kx) + pad;
              if (ox < 0 || ox >= static_cast<long>(d.width)) continue;
              for (std::size_t co = 0; co < d.out_channels; ++co)
                acc += weight[widx(d, co, ky, kx, ci)] *
                       grad_out[nhwc(b, oy, ox, co, d.height, d.width, d.out_channels)];
            }
          }
          grad_shared[(y * d.width + x) * d.in_channels + ci] += acc;
        }
}

void conv2d_backward_params(const ConvDims& d, std::span<const double> in, std::span<const double> grad_out,
                            std::span<double> grad_weight, std::span<double> grad_bias) {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  const std::size_t pad = d.kernel / 2;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t x = 0; x < d.width; ++x)
        for (std::size_t co = 0; co < d.out_channels; ++co) {
          const double g = grad_out[nhwc(b, y, x, co, d.height, d.width, d.out_channels)];
          grad_bias[co] += g;
          for (std::size_t ky = 0; ky < d.kernel; ++ky) {
            const long iy = tap(y, ky, pad, d.height);
            if (iy < 0) continue;
            for (std::size_t kx = 0; kx < d.kernel; ++kx) {
              const long ix = tap(x, kx, pad, d.width);
              if (ix < 0) continue;
              for (std::size_t ci = 0; ci < d.in_channels; ++ci)
                grad_weight[widx(d, co, ky, kx, ci)] +=
                    g * in[nhwc(b, iy, ix, ci, d.height, d.width, d.in_channels)];
            }
          }
        }
}

void relu_forward(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(std::span<const double> pre, std::span<const double> grad_out, std::span<double> grad_in) {
  for (std::size_t i = 0; i < pre.size(); ++i) grad_in[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
}

void maxpool2_forward(const PoolDims& d, std::span<const double> in, std::span<double> out,
                      std::span<std::uint32_t> argmax) {
  const std::size_t oh = d.out_height(), ow = d.out_width();
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t c = 0; c < d.channels; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t i = nhwc(b, 2 * y + dy, 2 * x + dx, c, d.height, d.width, d.channels);
              if (in[i] > best) {
                best = in[i];
                best_idx = i;
              }
            }
          const std::size_t o = nhwc(b, y, x, c, oh, ow, d.channels);
          out[o] = best;
          argmax[o] = static_cast<std::uint32_t>(best_idx);
        }
}

void maxpool2_backward(const PoolDims& d, std::span<const std::uint32_t> argmax, std::span<const double> grad_out,
                       std::span<double> grad_in) {
  std::fill(grad_in.begin(), grad_in.begin() + d.input_size(), 0.0);
  for (std::size_t o = 0; o < d.output_size(); ++o) grad_in[argmax[o]] += grad_out[o];
}

void dense_forward(const DenseDims& d, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out) {
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t k = 0; k < d.out_features; ++k) {
      double acc = bias[k];
      for (std::size_t j = 0; j < d.in_features; ++j)
        acc += weight[k * d.in_features + j] * in[b * d.in_features + j];
      out[b * d.out_features + k] = acc;
    }
}

void dense_backward_input(const DenseDims& d, std::span<const double> weight, std::span<const double> grad_out,
                          std::span<double> grad_in) {
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t j = 0; j < d.in_features; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d.out_features; ++k)
        acc += weight[k * d.in_features + j] * grad_out[b * d.out_features + k];
      grad_in[b * d.in_features + j] = acc;
    }
}

void dense_backward_params(const DenseDims& d, std::span<const double> in, std::span<const double> grad_out,
                           std::span<double> grad_weight, std::span<double> grad_bias) {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t k = 0; k < d.out_features; ++k) {
      const double g = grad_out[b * d.out_features + k];
      grad_bias[k] += g;
      for (std::size_t j = 0; j < d.in_features; ++j)
        grad_weight[k * d.in_features + j] += g * in[b * d.in_features + j];
    }
}

}  // namespace viap::kernels::reference

namespace viap::kernels {

void softmax_cross_entropy(const DenseDims& d, std::span<const double> logits,
                           std::span<const std::size_t> labels, std::span<double> probs,
                           std::span<double> losses, std::span<double> grad_logits) {
  const std::size_t K = d.out_features;
  const double inv_batch = 1.0 / static_cast<double>(d.batch);
  for (std::size_t b = 0; b < d.batch; ++b) {
    const auto row = logits.subspan(b * K, K);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
    const double log_z = m + std::log(z);
    for (std::size_t k = 0; k < K; ++k) {
      const double p = std::exp(row[k] - log_z);
      probs[b * K + k] = p;
      grad_logits[b * K + k] = (p - (k == labels[b] ? 1.0 : 0.0)) * inv_batch;
    }
    losses[b] = log_z - row[labels[b]];
  }
}

}  // namespace viap::kernels
