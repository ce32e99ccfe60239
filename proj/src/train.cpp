#include "landseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "landseg/rng.hpp"

namespace landseg {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be finite and non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ParameterError("momentum must lie in [0,1)");
  }
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  if (max_steps < 0) throw ParameterError("max_steps must be non-negative");
  if (eval_interval < 1) throw ParameterError("eval interval must be positive");
  if (max_steps > 0 && eval_interval > max_steps) {
    throw ParameterError("eval interval " + std::to_string(eval_interval) +
                         " exceeds max steps " + std::to_string(max_steps));
  }
}

TrainState init_train_state(const ModelConfig& config) {
  TrainState state;
  state.model = build_model(config);
  state.velocity_w.reserve(state.model.layers.size());
  state.velocity_b.reserve(state.model.layers.size());
  for (const ConvLayerT<float>& layer : state.model.layers) {
    state.velocity_w.emplace_back(layer.weight.shape);
    state.velocity_b.emplace_back(layer.bias.size(), 0.0f);
  }
  return state;
}

namespace {

void batch_tensors(const std::vector<const SamplePair*>& batch, Tensor& images,
                   std::vector<LabelMask>& targets) {
  std::vector<const RasterImage*> rasters;
  rasters.reserve(batch.size());
  targets.clear();
  targets.reserve(batch.size());
  for (const SamplePair* s : batch) {
    rasters.push_back(&s->image);
    targets.push_back(s->mask);
  }
  images = images_to_batch(rasters);
}

}  // namespace

double train_step(TrainState& state, const std::vector<const SamplePair*>& batch,
                  const TrainConfig& config) {
  if (batch.empty()) throw ParameterError("train_step got an empty batch");

  Tensor images;
  std::vector<LabelMask> targets;
  batch_tensors(batch, images, targets);

  const std::optional<int> ignore =
      config.ignore_unknown_in_loss ? std::optional<int>(kClassUnknown) : std::nullopt;
  ModelLoss<float> result = model_loss_and_grads(state.model, images, targets, ignore);

  if (!std::isfinite(result.loss)) {
    throw TrainingError(state.step + 1, "non-finite loss at step " + std::to_string(state.step + 1) +
                                            "; training diverged");
  }

  const float lr = static_cast<float>(config.learning_rate);
  const float mu = static_cast<float>(config.momentum);
  for (std::size_t l = 0; l < state.model.layers.size(); ++l) {
    ConvLayerT<float>& layer = state.model.layers[l];
    Tensor& vw = state.velocity_w[l];
    const Tensor& gw = result.grads.weight[l];
    for (std::size_t i = 0; i < vw.data.size(); ++i) {
      vw.data[i] = mu * vw.data[i] + gw.data[i];
      layer.weight.data[i] -= lr * vw.data[i];
    }
    std::vector<float>& vb = state.velocity_b[l];
    const std::vector<float>& gb = result.grads.bias[l];
    for (std::size_t i = 0; i < vb.size(); ++i) {
      vb[i] = mu * vb[i] + gb[i];
      layer.bias[i] -= lr * vb[i];
    }
  }

  ++state.step;
  state.running_loss = state.step == 1 ? result.loss
                                       : 0.95 * state.running_loss + 0.05 * result.loss;
  return result.loss;
}

EvalResult evaluate(const Model& model, const std::vector<SamplePair>& eval_set,
                    std::optional<int> ignore_class) {
  if (eval_set.empty()) throw DataError("evaluation set is empty");

  EvalResult result;
  double loss_sum = 0.0;
  std::size_t loss_pixels = 0;
  for (const SamplePair& sample : eval_set) {
    const Tensor image = image_to_tensor(sample.image);
    const Tensor logits = model_forward(model, image);
    const LossResult<float> loss = softmax_cross_entropy(logits, {sample.mask}, ignore_class);
    loss_sum += loss.loss * static_cast<double>(loss.pixels);
    loss_pixels += loss.pixels;
    result.cm += confusion(argmax_mask(logits), sample.mask);
  }
  result.per_class = iou_per_class(result.cm);
  result.miou = mean_iou(result.per_class);
  result.loss = loss_pixels > 0 ? loss_sum / static_cast<double>(loss_pixels) : 0.0;
  return result;
}

ModelCheckpoint train_loop(const std::vector<SamplePair>& train_set,
                           const std::vector<SamplePair>& eval_set, const ModelConfig& model_config,
                           const TrainConfig& train_config, const std::filesystem::path& out_dir,
                           const TrainProgressFn& progress) {
  train_config.validate();
  if (train_set.empty()) throw DataError("training set is empty");

  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.csv", std::ios::trunc);
  if (!log) throw IoError("cannot open training log in " + out_dir.string());
  log << "step,loss,eval_miou\n";

  TrainState state = init_train_state(model_config);
  Rng shuffle_rng(train_config.seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  const std::optional<int> ignore =
      train_config.ignore_unknown_in_loss ? std::optional<int>(kClassUnknown) : std::nullopt;

  char line[128];
  while (state.step < train_config.max_steps) {
    std::vector<const SamplePair*> batch;
    batch.reserve(static_cast<std::size_t>(train_config.batch_size));
    for (int b = 0; b < train_config.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(&train_set[order[cursor++]]);
      if (cursor == order.size()) break;  // epoch boundary: no replacement
    }

    const double loss = train_step(state, batch, train_config);

    const bool eval_now = !eval_set.empty() && (state.step % train_config.eval_interval == 0 ||
                                                state.step == train_config.max_steps);
    if (eval_now) {
      const EvalResult eval = evaluate(state.model, eval_set, ignore);
      std::snprintf(line, sizeof line, "%ld,%.6f,%.6f\n", state.step, loss, eval.miou);
      log << line;
      const ModelCheckpoint ckpt =
          checkpoint_from_model(state.model, static_cast<std::uint64_t>(state.step));
      save_checkpoint_atomic(ckpt, out_dir / "latest.ckpt");
      if (eval.miou > state.best_eval_miou) {
        state.best_eval_miou = eval.miou;
        save_checkpoint_atomic(ckpt, out_dir / "best.ckpt");
      }
      if (progress) progress(state.step, loss, eval.miou);
    } else {
      std::snprintf(line, sizeof line, "%ld,%.6f,\n", state.step, loss);
      log << line;
      if (progress) progress(state.step, loss, std::nullopt);
    }
  }

  const ModelCheckpoint final_ckpt =
      checkpoint_from_model(state.model, static_cast<std::uint64_t>(state.step));
  save_checkpoint_atomic(final_ckpt, out_dir / "latest.ckpt");
  if (!log) throw IoError("writing training log failed");
  return final_ckpt;
}

}  // namespace landseg
