#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "landseg/checkpoint.hpp"
#include "landseg/dataset.hpp"
#include "landseg/metrics.hpp"
#include "landseg/model.hpp"

namespace landseg {

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int batch_size = 4;
  long max_steps = 500;
  long eval_interval = 100;
  std::uint64_t seed = 1;
  bool ignore_unknown_in_loss = false;

  void validate() const;  // throws ParameterError
};

struct TrainState {
  Model model;
  std::vector<Tensor> velocity_w;             // one per layer, weight-shaped
  std::vector<std::vector<float>> velocity_b;
  long step = 0;
  double running_loss = 0.0;  // exponential moving average
  double best_eval_miou = -1.0;
};

TrainState init_train_state(const ModelConfig& config);

// One SGD-with-momentum step over `batch`: forward, softmax
// cross-entropy, backward, then v <- mu*v + g and w <- w - lr*v.
// Returns the batch loss; throws TrainingError when it goes non-finite.
double train_step(TrainState& state, const std::vector<const SamplePair*>& batch,
                  const TrainConfig& config);

struct EvalResult {
  double miou = 0.0;
  IouPerClass per_class{};
  double loss = 0.0;
  ConfusionMatrix cm;
};

// Accumulates one confusion matrix (and mean loss) across all samples.
// Read-only with respect to the model.
EvalResult evaluate(const Model& model, const std::vector<SamplePair>& eval_set,
                    std::optional<int> ignore_class = std::nullopt);

// Called after each step; eval_miou is set on evaluation steps.
using TrainProgressFn = std::function<void(long step, double loss, std::optional<double> eval_miou)>;

// Full loop: seeded per-epoch shuffle, batches without replacement,
// periodic evaluation + checkpointing (latest.ckpt / best.ckpt, written
// atomically), and a `step,loss,eval_miou` CSV log. Returns the final
// checkpoint.
ModelCheckpoint train_loop(const std::vector<SamplePair>& train_set,
                           const std::vector<SamplePair>& eval_set, const ModelConfig& model_config,
                           const TrainConfig& train_config, const std::filesystem::path& out_dir,
                           const TrainProgressFn& progress = {});

}  // namespace landseg
