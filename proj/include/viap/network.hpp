#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "viap/tensor.hpp"

namespace viap {

/// Which kernel set runs a pass. Both produce the same values; `reference`
/// is the serial ground truth used by tests and benchmarks.
enum class Exec { parallel, reference };

/// conv(C->8,3x3) -> relu -> maxpool2 -> conv(8->16,3x3) -> relu -> maxpool2 -> dense(K).
/// Only the input extents and class count vary.
struct Architecture {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t classes = 4;

  static constexpr std::size_t kConv1Channels = 8;
  static constexpr std::size_t kConv2Channels = 16;
  static constexpr std::size_t kKernel = 3;

  std::size_t dense_inputs() const { return (height / 4) * (width / 4) * kConv2Channels; }
  Shape image_shape() const { return {height, width, channels}; }
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Every trainable tensor of the classifier.
struct ModelParams {
  Architecture arch;
  Tensor conv1_w;  // [8, 3, 3, C]
  Tensor conv1_b;  // [8]
  Tensor conv2_w;  // [16, 3, 3, 8]
  Tensor conv2_b;  // [16]
  Tensor dense_w;  // [K, H/4 * W/4 * 16]
  Tensor dense_b;  // [K]

  static ModelParams zeros(const Architecture& arch);

  static constexpr std::array<std::string_view, 6> kFieldNames = {"conv1_w", "conv1_b", "conv2_w",
                                                                   "conv2_b", "dense_w", "dense_b"};
  std::array<Tensor*, 6> fields();
  std::array<const Tensor*, 6> fields() const;

  std::size_t parameter_count() const;
  /// Throws ShapeError / NonFiniteError if any tensor disagrees with `arch`.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct LossGrad {
  double loss = 0.0;  // mean cross-entropy over the batch
  Tensor grad;
};

struct LossParamGrad {
  double loss = 0.0;
  ModelParams grads;
};

enum GradRequest : unsigned {
  kGradNone = 0,
  kGradInput = 1u << 0,
  kGradShared = 1u << 1,
  kGradParams = 1u << 2,
};

struct BackwardResult {
  double loss = 0.0;
  std::vector<double> example_losses;
  Tensor input_grad;   // [B,H,W,C] when requested
  Tensor shared_grad;  // [H,W,C], batch sum of input_grad, when requested
  ModelParams param_grads;
};

/// Intermediates of one forward pass, kept for the backward pass.
class Graph {
 public:
  static Graph record(const ModelParams& params, const Tensor& batch, Exec exec = Exec::parallel);

  std::size_t batch_size() const { return batch_; }
  const Tensor& logits() const { return logits_; }
  const Tensor& probabilities() const { return probs_; }

  /// Reverse pass for the mean cross-entropy against `labels`. The params
  /// must be the ones the graph was recorded with.
  BackwardResult backward(const ModelParams& params, std::span<const std::size_t> labels, unsigned request) const;

  /// One byte per relu unit (active or not) and per pool window (winning
  /// offset). Two inputs with equal patterns lie in the same linear region.
  std::vector<std::uint8_t> activation_pattern() const;

 private:
  Exec exec_ = Exec::parallel;
  Architecture arch_;
  std::size_t batch_ = 0;
  Tensor input_, conv1_, relu1_, pool1_, conv2_, relu2_, pool2_, logits_, probs_;
  std::vector<std::uint32_t> argmax1_, argmax2_;
};

Tensor forward(const ModelParams& params, const Tensor& batch, Exec exec = Exec::parallel);
LossGrad loss_and_input_grad(const ModelParams& params, const Tensor& batch, std::span<const std::size_t> labels,
                             Exec exec = Exec::parallel);
LossParamGrad loss_and_param_grad(const ModelParams& params, const Tensor& batch,
                                  std::span<const std::size_t> labels, Exec exec = Exec::parallel);

/// Row-wise softmax of [B,K] logits.
Tensor softmax(const Tensor& logits);

/// A differentiable image classifier as seen by the attacks.
class Model {
 public:
  virtual ~Model() = default;

  virtual Shape image_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Tensor logits(const Tensor& batch) const = 0;
  virtual LossGrad loss_and_input_grad(const Tensor& batch, std::span<const std::size_t> labels) const = 0;

  /// Gradient of the mean batch loss of {clamp(X_i + delta, 0, 1)} with
  /// respect to delta. The clamp is passed through as identity. The default
  /// sums per-example input gradients in batch order.
  virtual LossGrad loss_and_shared_grad(const Tensor& images, const Tensor& delta,
                                        std::span<const std::size_t> labels) const;

  Tensor probabilities(const Tensor& batch) const { return softmax(logits(batch)); }
};

/// The fixed CNN behind the Model interface.
class ConvNet final : public Model {
 public:
  explicit ConvNet(ModelParams params, Exec exec = Exec::parallel);

  const ModelParams& params() const { return params_; }

  Shape image_shape() const override { return params_.arch.image_shape(); }
  std::size_t num_classes() const override { return params_.arch.classes; }
  Tensor logits(const Tensor& batch) const override;
  LossGrad loss_and_input_grad(const Tensor& batch, std::span<const std::size_t> labels) const override;
  /// Reduces over the batch inside the first convolution's backward kernel.
  LossGrad loss_and_shared_grad(const Tensor& images, const Tensor& delta,
                                std::span<const std::size_t> labels) const override;

 private:
  ModelParams params_;
  Exec exec_;
};

/// clamp(X_i + delta, 0, 1) for every image of a [B,H,W,C] batch.
Tensor add_clamped(const Tensor& images, const Tensor& delta);

}  // namespace viap
