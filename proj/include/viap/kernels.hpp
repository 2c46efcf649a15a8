#pragma once

// Primitive layer kernels for the fixed classifier. Two implementations share
// one signature set:
//
//   kernels::reference  plain serial loops written for readability; the
//                       ground truth the tests and benchmarks compare against
//   kernels::omp        OpenMP over the batch axis with scatter-form inner
//                       loops; batch reductions are done per example and then
//                       summed in example order so results do not depend on
//                       the thread count
//
// Layouts: activations are NHWC, conv weights are [Cout, k, k, Cin], dense
// weights are [K, D]. Convolutions use stride 1 and zero "same" padding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace viap::kernels {

struct ConvDims {
  std::size_t batch = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;

  std::size_t input_size() const { return batch * height * width * in_channels; }
  std::size_t output_size() const { return batch * height * width * out_channels; }
  std::size_t weight_size() const { return out_channels * kernel * kernel * in_channels; }
};

struct PoolDims {
  std::size_t batch = 1;
  std::size_t height = 0;  // input extents; output is floor(h/2) x floor(w/2)
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t out_height() const { return height / 2; }
  std::size_t out_width() const { return width / 2; }
  std::size_t input_size() const { return batch * height * width * channels; }
  std::size_t output_size() const { return batch * out_height() * out_width() * channels; }
};

struct DenseDims {
  std::size_t batch = 1;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

#define VIAP_KERNEL_DECLS                                                                              \
  void conv2d_forward(const ConvDims& d, std::span<const double> in, std::span<const double> weight,  \
                      std::span<const double> bias, std::span<double> out);                            \
  /* Overwrites grad_in with dLoss/dInput. */                                                          \
  void conv2d_backward_input(const ConvDims& d, std::span<const double> weight,                         \
                             std::span<const double> grad_out, std::span<double> grad_in);             \
  /* Overwrites grad_shared [H,W,Cin] with the batch sum of dLoss/dInput. */                           \
  void conv2d_backward_input_shared(const ConvDims& d, std::span<const double> weight,                 \
                                    std::span<const double> grad_out, std::span<double> grad_shared);  \
  /* Overwrites grad_weight / grad_bias with sums over the batch. */                                   \
  void conv2d_backward_params(const ConvDims& d, std::span<const double> in,                           \
                              std::span<const double> grad_out, std::span<double> grad_weight,         \
                              std::span<double> grad_bias);                                            \
  void relu_forward(std::span<const double> in, std::span<double> out);                                \
  void relu_backward(std::span<const double> pre, std::span<const double> grad_out,                    \
                     std::span<double> grad_in);                                                       \
  /* argmax receives, per output element, the flat input index that won. */                            \
  void maxpool2_forward(const PoolDims& d, std::span<const double> in, std::span<double> out,          \
                        std::span<std::uint32_t> argmax);                                              \
  void maxpool2_backward(const PoolDims& d, std::span<const std::uint32_t> argmax,                     \
                         std::span<const double> grad_out, std::span<double> grad_in);                 \
  void dense_forward(const DenseDims& d, std::span<const double> in, std::span<const double> weight,   \
                     std::span<const double> bias, std::span<double> out);                             \
  void dense_backward_input(const DenseDims& d, std::span<const double> weight,                        \
                            std::span<const double> grad_out, std::span<double> grad_in);              \
  void dense_backward_params(const DenseDims& d, std::span<const double> in,                           \
                             std::span<const double> grad_out, std::span<double> grad_weight,          \
                             std::span<double> grad_bias);

namespace reference {
VIAP_KERNEL_DECLS
}  // namespace reference

namespace omp {
VIAP_KERNEL_DECLS
}  // namespace omp

#undef VIAP_KERNEL_DECLS

/// Row-wise softmax of [B,K] logits into probs, mean cross-entropy against
/// labels into `losses` (per example), and dLoss/dLogits for the batch-mean
/// loss into grad_logits. Shared by both kernel sets: it is O(B*K).
void softmax_cross_entropy(const DenseDims& d, std::span<const double> logits,
                           std::span<const std::size_t> labels, std::span<double> probs,
                           std::span<double> losses, std::span<double> grad_logits);

}  // namespace viap::kernels
