#pragma once

// Encoder - ASPP - decoder segmentation network. The encoder is a stack
// of 3x3 conv+ReLU stages that downsample by 2 until the configured
// output stride, after which stages keep stride 1 and dilate instead.
// ASPP runs a 1x1 branch, one dilated 3x3 branch per configured rate,
// and an image-pooling branch, then fuses with a 1x1 conv. The decoder
// lifts the fused features to the stride-4 skip, concatenates a reduced
// low-level map, refines with two 3x3 convs, and classifies per pixel.
//
// Forward and backward are written per operation and composed
// explicitly; ModelActs carries everything the backward pass needs.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"
#include "landseg/ops.hpp"
#include "landseg/rng.hpp"
#include "landseg/tensor.hpp"

namespace landseg {

struct ModelConfig {
  int input_channels = 3;
  int num_classes = kNumClasses;
  int output_stride = 16;
  std::vector<int> encoder_channel_plan = {12, 24, 32, 48};
  std::vector<int> aspp_rates = {6, 12, 18};
  int aspp_out_channels = 48;
  int decoder_low_level_channels = 16;
  std::uint64_t seed = 23;

  void validate() const;  // throws ParameterError

  // Canonical key=value text block; embedded verbatim in checkpoints.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct ConvLayerT {
  std::string name;
  ConvParams params;
  TensorT<T> weight;    // (out, in, k, k)
  std::vector<T> bias;  // (out)
};

template <typename T>
struct ModelT {
  ModelConfig config;
  std::vector<ConvLayerT<T>> layers;  // declaration order == checkpoint order

  // Role indices into `layers`.
  std::vector<int> enc;
  int low_stage = -1;  // encoder stage whose output is the stride-4 tap
  int aspp_1x1 = -1;
  std::vector<int> aspp_rate_layers;
  int aspp_pool = -1;
  int aspp_fuse = -1;
  int dec_reduce = -1;
  int dec_refine0 = -1;
  int dec_refine1 = -1;
  int dec_classifier = -1;
};

using Model = ModelT<float>;

// Topology from config with fan-in-scaled uniform weights drawn from a
// generator seeded by config.seed; biases start at zero.
Model build_model(const ModelConfig& config);

template <typename To, typename From>
ModelT<To> model_cast(const ModelT<From>& src) {
  ModelT<To> out;
  out.config = src.config;
  out.enc = src.enc;
  out.low_stage = src.low_stage;
  out.aspp_1x1 = src.aspp_1x1;
  out.aspp_rate_layers = src.aspp_rate_layers;
  out.aspp_pool = src.aspp_pool;
  out.aspp_fuse = src.aspp_fuse;
  out.dec_reduce = src.dec_reduce;
  out.dec_refine0 = src.dec_refine0;
  out.dec_refine1 = src.dec_refine1;
  out.dec_classifier = src.dec_classifier;
  out.layers.reserve(src.layers.size());
  for (const ConvLayerT<From>& l : src.layers) {
    ConvLayerT<To> c;
    c.name = l.name;
    c.params = l.params;
    c.weight = tensor_cast<To>(l.weight);
    c.bias.assign(l.bias.begin(), l.bias.end());
    out.layers.push_back(std::move(c));
  }
  return out;
}

// Activations saved by the forward pass for the explicit backward.
template <typename T>
struct ModelActs {
  std::vector<TensorT<T>> enc_in;   // conv input per encoder stage
  std::vector<TensorT<T>> enc_pre;  // conv output per stage, pre-ReLU
  TensorT<T> high;
  TensorT<T> low;

  std::vector<TensorT<T>> branch_pre;  // [1x1, rates..., pool conv] pre-ReLU
  TensorT<T> pooled;                   // global average of `high`
  TensorT<T> aspp_cat;
  TensorT<T> fuse_pre;
  TensorT<T> aspp_out;

  TensorT<T> up_aspp;  // aspp_out lifted to stride 4
  TensorT<T> reduce_pre, low_red;
  TensorT<T> dec_cat;
  TensorT<T> refine0_pre, refine0;
  TensorT<T> refine1_pre, refine1;
  TensorT<T> logits_small;  // classifier output at stride 4
};

template <typename T>
struct ModelGrads {
  std::vector<TensorT<T>> weight;     // parallel to model.layers
  std::vector<std::vector<T>> bias;
};

namespace detail {

template <typename T>
void add_inplace(TensorT<T>& dst, const TensorT<T>& src) {
  if (dst.shape != src.shape) {
    throw DimensionError("gradient accumulation shape mismatch: " + dst.shape.str() + " vs " +
                         src.shape.str());
  }
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
TensorT<T> apply_conv(const ModelT<T>& model, int layer_id, const TensorT<T>& x) {
  const ConvLayerT<T>& l = model.layers[static_cast<std::size_t>(layer_id)];
  return conv2d(x, l.weight, l.bias, l.params);
}

// conv backward that records the layer's parameter grads and returns the
// input grad.
template <typename T>
TensorT<T> conv_backward_into(const ModelT<T>& model, int layer_id, const TensorT<T>& out_grad,
                              const TensorT<T>& saved_input, ModelGrads<T>& grads) {
  const ConvLayerT<T>& l = model.layers[static_cast<std::size_t>(layer_id)];
  ConvGrads<T> g = conv2d_backward(out_grad, saved_input, l.weight, l.params);
  add_inplace(grads.weight[static_cast<std::size_t>(layer_id)], g.weight_grad);
  std::vector<T>& bg = grads.bias[static_cast<std::size_t>(layer_id)];
  for (std::size_t i = 0; i < bg.size(); ++i) bg[i] += g.bias_grad[i];
  return std::move(g.input_grad);
}

}  // namespace detail

template <typename T>
std::pair<TensorT<T>, TensorT<T>> encoder_forward(const ModelT<T>& model, const TensorT<T>& image,
                                                  ModelActs<T>& acts) {
  const ModelConfig& cfg = model.config;
  if (image.shape.c != cfg.input_channels) {
    throw DimensionError("encoder expects " + std::to_string(cfg.input_channels) +
                         " input channels, got " + std::to_string(image.shape.c));
  }
  if (image.shape.h % cfg.output_stride != 0 || image.shape.w % cfg.output_stride != 0) {
    throw DimensionError("input " + std::to_string(image.shape.h) + "x" +
                         std::to_string(image.shape.w) + " not divisible by output stride " +
                         std::to_string(cfg.output_stride));
  }

  acts.enc_in.clear();
  acts.enc_pre.clear();
  TensorT<T> x = image;
  for (std::size_t i = 0; i < model.enc.size(); ++i) {
    acts.enc_in.push_back(x);
    TensorT<T> pre = detail::apply_conv(model, model.enc[i], x);
    x = relu(pre);
    acts.enc_pre.push_back(std::move(pre));
    if (static_cast<int>(i) == model.low_stage) acts.low = x;
  }
  acts.high = x;
  return {acts.high, acts.low};
}

template <typename T>
TensorT<T> aspp_forward(const ModelT<T>& model, const TensorT<T>& features, ModelActs<T>& acts) {
  acts.branch_pre.clear();
  std::vector<TensorT<T>> branches;

  TensorT<T> pre = detail::apply_conv(model, model.aspp_1x1, features);
  branches.push_back(relu(pre));
  acts.branch_pre.push_back(std::move(pre));

  for (int layer_id : model.aspp_rate_layers) {
    TensorT<T> rate_pre = detail::apply_conv(model, layer_id, features);
    branches.push_back(relu(rate_pre));
    acts.branch_pre.push_back(std::move(rate_pre));
  }

  acts.pooled = global_avg_pool(features);
  TensorT<T> pool_pre = detail::apply_conv(model, model.aspp_pool, acts.pooled);
  TensorT<T> pool_act = relu(pool_pre);
  acts.branch_pre.push_back(std::move(pool_pre));
  branches.push_back(broadcast_spatial(pool_act, features.shape.h, features.shape.w));

  TensorT<T> cat = branches[0];
  for (std::size_t i = 1; i < branches.size(); ++i) cat = concat_channels(cat, branches[i]);
  acts.aspp_cat = std::move(cat);

  acts.fuse_pre = detail::apply_conv(model, model.aspp_fuse, acts.aspp_cat);
  acts.aspp_out = relu(acts.fuse_pre);
  return acts.aspp_out;
}

template <typename T>
TensorT<T> decoder_forward(const ModelT<T>& model, const TensorT<T>& aspp_out,
                           const TensorT<T>& low_level, ModelActs<T>& acts) {
  const int lift = model.config.output_stride / 4;
  if (aspp_out.shape.h * lift != low_level.shape.h ||
      aspp_out.shape.w * lift != low_level.shape.w) {
    throw DimensionError("decoder stride mismatch: aspp " + aspp_out.shape.str() + " vs low-level " +
                         low_level.shape.str());
  }

  acts.up_aspp = bilinear_upsample(aspp_out, lift);
  acts.reduce_pre = detail::apply_conv(model, model.dec_reduce, low_level);
  acts.low_red = relu(acts.reduce_pre);
  acts.dec_cat = concat_channels(acts.up_aspp, acts.low_red);

  acts.refine0_pre = detail::apply_conv(model, model.dec_refine0, acts.dec_cat);
  acts.refine0 = relu(acts.refine0_pre);
  acts.refine1_pre = detail::apply_conv(model, model.dec_refine1, acts.refine0);
  acts.refine1 = relu(acts.refine1_pre);

  acts.logits_small = detail::apply_conv(model, model.dec_classifier, acts.refine1);
  return bilinear_upsample(acts.logits_small, 4);
}

template <typename T>
TensorT<T> model_forward(const ModelT<T>& model, const TensorT<T>& image, ModelActs<T>& acts) {
  auto [high, low] = encoder_forward(model, image, acts);
  TensorT<T> fused = aspp_forward(model, high, acts);
  return decoder_forward(model, fused, low, acts);
}

template <typename T>
TensorT<T> model_forward(const ModelT<T>& model, const TensorT<T>& image) {
  ModelActs<T> acts;
  return model_forward(model, image, acts);
}

// Reverse pass over the whole network; returns parameter grads in layer
// order. `logit_grad` is d(loss)/d(logits) at full input resolution.
template <typename T>
ModelGrads<T> model_backward(const ModelT<T>& model, const ModelActs<T>& acts,
                             const TensorT<T>& logit_grad) {
  ModelGrads<T> grads;
  grads.weight.reserve(model.layers.size());
  grads.bias.reserve(model.layers.size());
  for (const ConvLayerT<T>& l : model.layers) {
    grads.weight.emplace_back(l.weight.shape);
    grads.bias.emplace_back(l.bias.size(), T(0));
  }

  // Decoder.
  TensorT<T> d_small =
      bilinear_upsample_backward(logit_grad, acts.logits_small.shape, 4);
  TensorT<T> d_refine1 =
      detail::conv_backward_into(model, model.dec_classifier, d_small, acts.refine1, grads);
  d_refine1 = relu_backward(d_refine1, acts.refine1_pre);
  TensorT<T> d_refine0 =
      detail::conv_backward_into(model, model.dec_refine1, d_refine1, acts.refine0, grads);
  d_refine0 = relu_backward(d_refine0, acts.refine0_pre);
  TensorT<T> d_cat =
      detail::conv_backward_into(model, model.dec_refine0, d_refine0, acts.dec_cat, grads);

  auto [d_up, d_lowred] = split_channels(d_cat, acts.up_aspp.shape.c);
  d_lowred = relu_backward(d_lowred, acts.reduce_pre);
  TensorT<T> d_low =
      detail::conv_backward_into(model, model.dec_reduce, d_lowred, acts.low, grads);
  TensorT<T> d_aspp = bilinear_upsample_backward(d_up, acts.aspp_out.shape,
                                                 model.config.output_stride / 4);

  // ASPP.
  d_aspp = relu_backward(d_aspp, acts.fuse_pre);
  TensorT<T> d_aspp_cat =
      detail::conv_backward_into(model, model.aspp_fuse, d_aspp, acts.aspp_cat, grads);

  TensorT<T> d_high(acts.high.shape);
  const int width = model.config.aspp_out_channels;
  int offset = 0;

  TensorT<T> d_branch = slice_channels(d_aspp_cat, offset, width);
  offset += width;
  d_branch = relu_backward(d_branch, acts.branch_pre[0]);
  detail::add_inplace(
      d_high, detail::conv_backward_into(model, model.aspp_1x1, d_branch, acts.high, grads));

  for (std::size_t i = 0; i < model.aspp_rate_layers.size(); ++i) {
    d_branch = slice_channels(d_aspp_cat, offset, width);
    offset += width;
    d_branch = relu_backward(d_branch, acts.branch_pre[i + 1]);
    detail::add_inplace(d_high, detail::conv_backward_into(model, model.aspp_rate_layers[i],
                                                           d_branch, acts.high, grads));
  }

  d_branch = slice_channels(d_aspp_cat, offset, width);
  TensorT<T> d_pool_act = broadcast_spatial_backward(d_branch);
  d_pool_act = relu_backward(d_pool_act, acts.branch_pre.back());
  TensorT<T> d_pooled =
      detail::conv_backward_into(model, model.aspp_pool, d_pool_act, acts.pooled, grads);
  detail::add_inplace(d_high, global_avg_pool_backward(d_pooled, acts.high.shape));

  // Encoder; the stride-4 tap feeds the decoder, so its gradient joins
  // the main path at that stage.
  TensorT<T> d_x = std::move(d_high);
  for (int i = static_cast<int>(model.enc.size()) - 1; i >= 0; --i) {
    if (i == model.low_stage) detail::add_inplace(d_x, d_low);
    d_x = relu_backward(d_x, acts.enc_pre[static_cast<std::size_t>(i)]);
    d_x = detail::conv_backward_into(model, model.enc[static_cast<std::size_t>(i)], d_x,
                                     acts.enc_in[static_cast<std::size_t>(i)], grads);
  }

  return grads;
}

template <typename T>
struct ModelLoss {
  double loss = 0.0;
  std::size_t pixels = 0;
  ModelGrads<T> grads;
};

// forward -> softmax cross-entropy -> backward, as one call.
template <typename T>
ModelLoss<T> model_loss_and_grads(const ModelT<T>& model, const TensorT<T>& images,
                                  const std::vector<LabelMask>& targets,
                                  std::optional<int> ignore_class = std::nullopt) {
  ModelActs<T> acts;
  TensorT<T> logits = model_forward(model, images, acts);
  LossResult<T> loss = softmax_cross_entropy(logits, targets, ignore_class);
  ModelLoss<T> out;
  out.loss = loss.loss;
  out.pixels = loss.pixels;
  out.grads = model_backward(model, acts, loss.logit_grad);
  return out;
}

// Per-pixel argmax over logit channels; ties break toward the lowest
// class index.
LabelMask argmax_mask(const Tensor& logits, int batch_index = 0);

LabelMask predict_mask(const Model& model, const Tensor& image);

// RasterImage -> (1,3,H,W) tensor scaled to [0,1].
Tensor image_to_tensor(const RasterImage& image);

// Stack same-sized images into one batch tensor.
Tensor images_to_batch(const std::vector<const RasterImage*>& images);

}  // namespace landseg
