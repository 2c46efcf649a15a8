#include "viap/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "viap/kernels.hpp"

namespace viap {

namespace {

namespace k = kernels;

struct KernelSet {
  decltype(&k::omp::conv2d_forward) conv_forward;
  decltype(&k::omp::conv2d_backward_input) conv_backward_input;
  decltype(&k::omp::conv2d_backward_input_shared) conv_backward_input_shared;
  decltype(&k::omp::conv2d_backward_params) conv_backward_params;
  decltype(&k::omp::relu_forward) relu_forward;
  decltype(&k::omp::relu_backward) relu_backward;
  decltype(&k::omp::maxpool2_forward) pool_forward;
  decltype(&k::omp::maxpool2_backward) pool_backward;
  decltype(&k::omp::dense_forward) dense_forward;
  decltype(&k::omp::dense_backward_input) dense_backward_input;
  decltype(&k::omp::dense_backward_params) dense_backward_params;
};

constexpr KernelSet kOmp{k::omp::conv2d_forward,         k::omp::conv2d_backward_input,
                         k::omp::conv2d_backward_input_shared, k::omp::conv2d_backward_params,
                         k::omp::relu_forward,           k::omp::relu_backward,
                         k::omp::maxpool2_forward,       k::omp::maxpool2_backward,
                         k::omp::dense_forward,          k::omp::dense_backward_input,
                         k::omp::dense_backward_params};

constexpr KernelSet kReference{k::reference::conv2d_forward,         k::reference::conv2d_backward_input,
                               k::reference::conv2d_backward_input_shared, k::reference::conv2d_backward_params,
                               k::reference::relu_forward,           k::reference::relu_backward,
                               k::reference::maxpool2_forward,       k::reference::maxpool2_backward,
                               k::reference::dense_forward,          k::reference::dense_backward_input,
                               k::reference::dense_backward_params};

const KernelSet& kernels_for(Exec exec) { return exec == Exec::parallel ? kOmp : kReference; }

k::ConvDims conv1_dims(const Architecture& a, std::size_t batch) {
  return {batch, a.height, a.width, a.channels, Architecture::kConv1Channels, Architecture::kKernel};
}
k::ConvDims conv2_dims(const Architecture& a, std::size_t batch) {
  return {batch, a.height / 2, a.width / 2, Architecture::kConv1Channels, Architecture::kConv2Channels,
          Architecture::kKernel};
}
k::PoolDims pool1_dims(const Architecture& a, std::size_t batch) {
  return {batch, a.height, a.width, Architecture::kConv1Channels};
}
k::PoolDims pool2_dims(const Architecture& a, std::size_t batch) {
  return {batch, a.height / 2, a.width / 2, Architecture::kConv2Channels};
}
k::DenseDims dense_dims(const Architecture& a, std::size_t batch) { return {batch, a.dense_inputs(), a.classes}; }

void check_batch(const Architecture& arch, const Tensor& batch) {
  const Shape want{arch.height, arch.width, arch.channels};
  if (batch.rank() != 4 || batch.extent(0) == 0 || Shape(batch.shape().begin() + 1, batch.shape().end()) != want) {
    throw ShapeError("batch shape " + shape_string(batch.shape()) + " does not match [B>=1," +
                     std::to_string(arch.height) + "," + std::to_string(arch.width) + "," +
                     std::to_string(arch.channels) + "]");
  }
  batch.require_finite("classifier input");
}

void check_labels(const Architecture& arch, std::size_t batch, std::span<const std::size_t> labels) {
  if (labels.size() != batch) {
    throw ShapeError("expected " + std::to_string(batch) + " labels, got " + std::to_string(labels.size()));
  }
  for (std::size_t label : labels) {
    if (label >= arch.classes) {
      throw Error("label_out_of_range",
                  "label " + std::to_string(label) + " outside [0," + std::to_string(arch.classes) + ")");
    }
  }
}

}  // namespace

void Architecture::validate() const {
  if (height < 4 || width < 4 || height % 4 || width % 4) {
    throw ShapeError("input extents must be positive multiples of 4");
  }
  if (channels == 0 || classes < 2) throw ShapeError("architecture needs >=1 channel and >=2 classes");
}

ModelParams ModelParams::zeros(const Architecture& arch) {
  arch.validate();
  constexpr std::size_t k = Architecture::kKernel, c1 = Architecture::kConv1Channels,
                        c2 = Architecture::kConv2Channels;
  ModelParams p;
  p.arch = arch;
  p.conv1_w = Tensor({c1, k, k, arch.channels});
  p.conv1_b = Tensor({c1});
  p.conv2_w = Tensor({c2, k, k, c1});
  p.conv2_b = Tensor({c2});
  p.dense_w = Tensor({arch.classes, arch.dense_inputs()});
  p.dense_b = Tensor({arch.classes});
  return p;
}

std::array<Tensor*, 6> ModelParams::fields() {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
}

std::array<const Tensor*, 6> ModelParams::fields() const {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : fields()) n += t->size();
  return n;
}

void ModelParams::validate() const {
  const ModelParams ref = zeros(arch);
  const auto mine = fields();
  const auto want = ref.fields();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->shape() != want[i]->shape()) {
      throw ShapeError(std::string(kFieldNames[i]) + " has shape " + shape_string(mine[i]->shape()) +
                       ", expected " + shape_string(want[i]->shape()));
    }
    mine[i]->require_finite(kFieldNames[i].data());
  }
}

Graph Graph::record(const ModelParams& params, const Tensor& batch, Exec exec) {
  const Architecture& a = params.arch;
  check_batch(a, batch);
  const KernelSet& ks = kernels_for(exec);
  const std::size_t B = batch.extent(0);
  constexpr std::size_t c1 = Architecture::kConv1Channels, c2 = Architecture::kConv2Channels;

  Graph g;
  g.exec_ = exec;
  g.arch_ = a;
  g.batch_ = B;
  g.input_ = batch;
  g.conv1_ = Tensor({B, a.height, a.width, c1});
  g.relu1_ = Tensor(g.conv1_.shape());
  g.pool1_ = Tensor({B, a.height / 2, a.width / 2, c1});
  g.conv2_ = Tensor({B, a.height / 2, a.width / 2, c2});
  g.relu2_ = Tensor(g.conv2_.shape());
  g.pool2_ = Tensor({B, a.height / 4, a.width / 4, c2});
  g.logits_ = Tensor({B, a.classes});
  g.argmax1_.resize(g.pool1_.size());
  g.argmax2_.resize(g.pool2_.size());

  ks.conv_forward(conv1_dims(a, B), g.input_.data(), params.conv1_w.data(), params.conv1_b.data(), g.conv1_.data());
  ks.relu_forward(g.conv1_.data(), g.relu1_.data());
  ks.pool_forward(pool1_dims(a, B), g.relu1_.data(), g.pool1_.data(), g.argmax1_);
  ks.conv_forward(conv2_dims(a, B), g.pool1_.data(), params.conv2_w.data(), params.conv2_b.data(), g.conv2_.data());
  ks.relu_forward(g.conv2_.data(), g.relu2_.data());
  ks.pool_forward(pool2_dims(a, B), g.relu2_.data(), g.pool2_.data(), g.argmax2_);
  ks.dense_forward(dense_dims(a, B), g.pool2_.data(), params.dense_w.data(), params.dense_b.data(),
                   g.logits_.data());
  g.logits_.require_finite("logits");
  g.probs_ = softmax(g.logits_);
  return g;
}

BackwardResult Graph::backward(const ModelParams& params, std::span<const std::size_t> labels,
                               unsigned request) const {
  if (batch_ == 0) throw Error("no_forward", "backward called before forward");
  if (!(params.arch == arch_)) throw ShapeError("backward params differ from the recorded architecture");
  check_labels(arch_, batch_, labels);
  const KernelSet& ks = kernels_for(exec_);
  const Architecture& a = arch_;
  const std::size_t B = batch_;

  BackwardResult r;
  r.example_losses.resize(B);
  Tensor probs(logits_.shape());
  Tensor g_logits(logits_.shape());
  kernels::softmax_cross_entropy(dense_dims(a, B), logits_.data(), labels, probs.data(), r.example_losses,
                                 g_logits.data());
  for (double l : r.example_losses) r.loss += l;
  r.loss /= static_cast<double>(B);
  if (!std::isfinite(r.loss)) throw NonFiniteError("non-finite loss");

  const bool want_params = request & kGradParams;
  if (want_params) r.param_grads = ModelParams::zeros(a);

  Tensor g_pool2(pool2_.shape());
  if (want_params) {
    ks.dense_backward_params(dense_dims(a, B), pool2_.data(), g_logits.data(), r.param_grads.dense_w.data(),
                             r.param_grads.dense_b.data());
  }
  if (!(request & (kGradInput | kGradShared | kGradParams))) return r;

  ks.dense_backward_input(dense_dims(a, B), params.dense_w.data(), g_logits.data(), g_pool2.data());
  Tensor g_relu2(relu2_.shape());
  ks.pool_backward(pool2_dims(a, B), argmax2_, g_pool2.data(), g_relu2.data());
  Tensor g_conv2(conv2_.shape());
  ks.relu_backward(conv2_.data(), g_relu2.data(), g_conv2.data());
  if (want_params) {
    ks.conv_backward_params(conv2_dims(a, B), pool1_.data(), g_conv2.data(), r.param_grads.conv2_w.data(),
                            r.param_grads.conv2_b.data());
  }
  Tensor g_pool1(pool1_.shape());
  ks.conv_backward_input(conv2_dims(a, B), params.conv2_w.data(), g_conv2.data(), g_pool1.data());
  Tensor g_relu1(relu1_.shape());
  ks.pool_backward(pool1_dims(a, B), argmax1_, g_pool1.data(), g_relu1.data());
  Tensor g_conv1(conv1_.shape());
  ks.relu_backward(conv1_.data(), g_relu1.data(), g_conv1.data());
  if (want_params) {
    ks.conv_backward_params(conv1_dims(a, B), input_.data(), g_conv1.data(), r.param_grads.conv1_w.data(),
                            r.param_grads.conv1_b.data());
  }
  if (request & kGradInput) {
    r.input_grad = Tensor(input_.shape());
    ks.conv_backward_input(conv1_dims(a, B), params.conv1_w.data(), g_conv1.data(), r.input_grad.data());
    r.input_grad.require_finite("input gradient");
  }
  if (request & kGradShared) {
    r.shared_grad = Tensor(a.image_shape());
    ks.conv_backward_input_shared(conv1_dims(a, B), params.conv1_w.data(), g_conv1.data(), r.shared_grad.data());
    r.shared_grad.require_finite("shared gradient");
  }
  return r;
}

std::vector<std::uint8_t> Graph::activation_pattern() const {
  std::vector<std::uint8_t> out;
  out.reserve(conv1_.size() + conv2_.size() + argmax1_.size() + argmax2_.size());
  for (double v : conv1_.data()) out.push_back(v > 0.0);
  for (double v : conv2_.data()) out.push_back(v > 0.0);
  for (std::uint32_t i : argmax1_) out.push_back(static_cast<std::uint8_t>(i & 0xff));
  for (std::uint32_t i : argmax2_) out.push_back(static_cast<std::uint8_t>(i & 0xff));
  return out;
}

Tensor forward(const ModelParams& params, const Tensor& batch, Exec exec) {
  return Graph::record(params, batch, exec).logits();
}

LossGrad loss_and_input_grad(const ModelParams& params, const Tensor& batch, std::span<const std::size_t> labels,
                             Exec exec) {
  check_labels(params.arch, batch.rank() ? batch.extent(0) : 0, labels);
  BackwardResult r = Graph::record(params, batch, exec).backward(params, labels, kGradInput);
  return {r.loss, std::move(r.input_grad)};
}

LossParamGrad loss_and_param_grad(const ModelParams& params, const Tensor& batch,
                                  std::span<const std::size_t> labels, Exec exec) {
  check_labels(params.arch, batch.rank() ? batch.extent(0) : 0, labels);
  BackwardResult r = Graph::record(params, batch, exec).backward(params, labels, kGradParams);
  for (const Tensor* t : r.param_grads.fields()) t->require_finite("parameter gradient");
  return {r.loss, std::move(r.param_grads)};
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [B,K] logits");
  const std::size_t B = logits.extent(0), K = logits.extent(1);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = logits.slice(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = std::exp(row[k] - log_z);
  }
  return out;
}

Tensor add_clamped(const Tensor& images, const Tensor& delta) {
  if (images.rank() < 1 || images.slice_size() != delta.size() ||
      Shape(images.shape().begin() + 1, images.shape().end()) != delta.shape()) {
    throw ShapeError("perturbation shape " + shape_string(delta.shape()) + " does not match images " +
                     shape_string(images.shape()));
  }
  Tensor out(images.shape());
  const std::size_t n = delta.size();
  for (std::size_t b = 0; b < images.extent(0); ++b)
    for (std::size_t i = 0; i < n; ++i) out[b * n + i] = std::clamp(images[b * n + i] + delta[i], 0.0, 1.0);
  return out;
}

LossGrad Model::loss_and_shared_grad(const Tensor& images, const Tensor& delta,
                                     std::span<const std::size_t> labels) const {
  LossGrad per = loss_and_input_grad(add_clamped(images, delta), labels);
  Tensor shared(delta.shape());
  const std::size_t n = delta.size();
  for (std::size_t b = 0; b < images.extent(0); ++b)
    for (std::size_t i = 0; i < n; ++i) shared[i] += per.grad[b * n + i];
  return {per.loss, std::move(shared)};
}

ConvNet::ConvNet(ModelParams params, Exec exec) : params_(std::move(params)), exec_(exec) { params_.validate(); }

Tensor ConvNet::logits(const Tensor& batch) const { return forward(params_, batch, exec_); }

LossGrad ConvNet::loss_and_input_grad(const Tensor& batch, std::span<const std::size_t> labels) const {
  return viap::loss_and_input_grad(params_, batch, labels, exec_);
}

LossGrad ConvNet::loss_and_shared_grad(const Tensor& images, const Tensor& delta,
                                       std::span<const std::size_t> labels) const {
  const Tensor batch = add_clamped(images, delta);
  check_labels(params_.arch, batch.extent(0), labels);
  BackwardResult r = Graph::record(params_, batch, exec_).backward(params_, labels, kGradShared);
  return {r.loss, std::move(r.shared_grad)};
}

}  // namespace viap
